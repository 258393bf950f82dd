// DOM glue: render the transcript, backlog and workflow panels from the
// session state and forward operator input. Everything displayed comes
// from service payloads.
import { ConsoleSession } from "./session.js";
import { backlogByList } from "./viewmodel.js";
function el(tag, className, text) {
    const node = document.createElement(tag);
    if (className)
        node.className = className;
    if (text !== undefined)
        node.textContent = text;
    return node;
}
function byId(id) {
    const node = document.getElementById(id);
    if (!node)
        throw new Error(`missing #${id}`);
    return node;
}
function renderTranscript(state) {
    const container = byId("transcript");
    container.replaceChildren();
    for (const entry of state.transcript) {
        const row = el("div", entry.agent ? "msg agent" : "msg human");
        row.appendChild(el("span", "author", entry.author));
        if (entry.time)
            row.appendChild(el("span", "time", entry.time));
        row.appendChild(el("div", "text", entry.text));
        container.appendChild(row);
    }
    container.scrollTop = container.scrollHeight;
}
function renderBacklog(state) {
    const container = byId("backlog");
    container.replaceChildren();
    for (const [listName, tasks] of backlogByList(state.backlog)) {
        const column = el("div", "list");
        column.appendChild(el("h3", undefined, `${listName} (${tasks.length})`));
        for (const task of tasks) {
            column.appendChild(taskCard(task));
        }
        container.appendChild(column);
    }
}
function taskCard(task) {
    const card = el("div", "card");
    const title = el("a", "card-title", `${task.id} · ${task.name}`);
    title.href = task.url;
    title.target = "_blank";
    card.appendChild(title);
    if (task.assignee)
        card.appendChild(el("div", "card-line", `assignee: ${task.assignee}`));
    if (task.labels.length)
        card.appendChild(el("div", "card-line", task.labels.join(", ")));
    return card;
}
function renderWorkflow(state, session) {
    const container = byId("workflow");
    container.replaceChildren();
    const panel = state.workflow;
    if (panel.kind === "none") {
        container.appendChild(el("p", "muted", "No workflow yet."));
        return;
    }
    const status = panel.active ? "active" : "ended";
    container.appendChild(el("h3", undefined, `${panel.kind} workflow (${status})`));
    if (panel.kind === "task") {
        const draft = panel.draft;
        const rows = [
            ["phase", draft.phase],
            ["title", draft.title],
            ["description", draft.description],
            ["priority", draft.priority],
            ["assignee", draft.assignee],
            ["labels", draft.labels.length ? draft.labels.join(", ") : null],
        ];
        for (const [name, value] of rows) {
            container.appendChild(el("div", "field", `${name}: ${value ?? "(missing)"}`));
        }
        return;
    }
    for (const draft of panel.drafts) {
        const box = el("div", draft.current ? "summary current" : "summary");
        box.appendChild(el("h4", undefined, `@${draft.member}${draft.confirmed ? " ✓" : ""}`));
        const section = (label, items) => {
            box.appendChild(el("div", "field", `${label}: ${items.length ? items.join(" | ") : "(none)"}`));
        };
        section("accomplished", draft.accomplished);
        section("planned", draft.planned);
        section("blockers", draft.blockers);
        if (panel.active && draft.current && !draft.confirmed) {
            const confirm = el("button", "confirm", `confirm as @${draft.member}`);
            confirm.addEventListener("click", () => void session.sendAs(draft.member, "yes"));
            box.appendChild(confirm);
        }
        container.appendChild(box);
    }
}
function renderChrome(state) {
    byId("connection").textContent = state.connection;
    byId("connection").dataset.status = state.connection;
    const banner = byId("banner");
    if (state.connection === "retrying") {
        banner.textContent = "connection lost, retrying...";
        banner.hidden = false;
    }
    else if (state.lastError) {
        banner.textContent = state.lastError;
        banner.hidden = false;
    }
    else {
        banner.hidden = true;
    }
    const send = byId("send");
    const input = byId("input");
    send.disabled = state.inFlight;
    input.disabled = state.inFlight;
    const picker = byId("speaker");
    if (picker.options.length !== state.team.length) {
        picker.replaceChildren();
        for (const member of state.team) {
            const option = document.createElement("option");
            option.value = member.handle;
            option.textContent = `${member.display_name} (@${member.handle})`;
            picker.appendChild(option);
        }
    }
}
function render(state, session) {
    renderChrome(state);
    renderTranscript(state);
    renderBacklog(state);
    renderWorkflow(state, session);
}
async function start() {
    const params = new URLSearchParams(window.location.search);
    const baseUrl = params.get("api") ?? "http://127.0.0.1:8470";
    const channel = params.get("channel") ?? "main";
    const token = params.get("token") ?? undefined;
    byId("channel-name").textContent = channel;
    const session = new ConsoleSession({ baseUrl, channel, token });
    session.subscribe((state) => render(state, session));
    const form = byId("composer");
    form.addEventListener("submit", (event) => {
        event.preventDefault();
        const input = byId("input");
        const speaker = byId("speaker").value;
        const text = input.value;
        if (!text.trim() || !speaker)
            return;
        input.value = "";
        void session.sendAs(speaker, text);
    });
    try {
        await session.connect();
    }
    catch (error) {
        byId("banner").textContent = `service unreachable: ${String(error)}`;
        byId("banner").hidden = false;
    }
}
void start();
//# sourceMappingURL=main.js.map