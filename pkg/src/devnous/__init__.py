"""DevNous: an ambient project-management agent for team chat.

Classifies unstructured messages into actionable intents, runs
human-in-the-loop task and summary workflows, and ships the replayable
evaluation harness (benchmark format, live/stateless protocols, multiset
metrics) used to measure it.
"""

from .classifier import (
    Classification,
    CompletionBackend,
    HttpCompletionBackend,
    RuleConfig,
    classify,
    rule_classify,
    validate_classifier_output,
)
from .errors import (
    ChatDeliveryError,
    ClassifierFailure,
    DevnousError,
    FormatError,
    ImpersonationError,
    LengthMismatch,
    MalformedMessage,
    NoActiveWorkflow,
    PermissionDenied,
    PMBackendFailure,
    RosterParseError,
    SchemaViolation,
    ToolError,
    UnknownTool,
    WorkflowAlreadyActive,
)
from .evaluation import (
    DatasetShape,
    EvalReport,
    LabelCounts,
    dataset_shape,
    evaluate,
    exact_match_accuracy,
    interrun_agreement,
    labelwise_metrics,
    load_benchmark,
    multiset_counts,
    multiset_f1,
    predictions_from_trace,
    render_report,
    replay_dataset,
    replay_stateless,
    run_live,
    write_dialogues,
)
from .model import (
    ActionType,
    Dialogue,
    IntentMultiset,
    IntentTuple,
    Message,
    MessageCategory,
    ProjectState,
    Summary,
    Task,
    TeamMember,
    TurnRecord,
    WorkflowKind,
    WorkflowState,
    ingest_message,
    parse_wire_message,
    snapshot_state,
)
from .orchestrator import (
    Engine,
    EngineConfig,
    Route,
    TurnOutcome,
    generate_response,
    route_action,
)
from .toolbox import (
    AgentGrant,
    InMemoryChat,
    InMemoryPM,
    PMAdapter,
    Toolbox,
    ToolDescriptor,
    get_conversation_history,
    load_team_info,
    memorize_string,
)
from .workflows import (
    TaskDraft,
    end_workflow,
    get_workflow_state,
    record_context_update,
    start_workflow,
    summary_step,
    task_step,
    update_workflow_data,
)

__version__ = "0.1.0"
