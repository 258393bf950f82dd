import pytest
from hypothesis import HealthCheck, settings

from devnous.model import ProjectState, Task, TeamMember

settings.register_profile(
    "ci", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("ci")


TEAM = [
    TeamMember("Maya Chen", "mchen", "Backend engineer"),
    TeamMember("Elena Davis", "edavis", "Frontend engineer"),
    TeamMember("Sara Novak", "snovak", "QA engineer"),
]

BACKLOG = [
    Task(
        id="T-1",
        name="OAuth implementation",
        description="OAuth 2.0 login",
        list_name="In Progress",
        labels=["feature"],
        assignee="mchen",
        url="https://tasks.local/T-1",
    ),
    Task(
        id="T-2",
        name="Bug fix for user profiles",
        description="EXIF rotation bug",
        list_name="In Progress",
        labels=["bug"],
        assignee="edavis",
        url="https://tasks.local/T-2",
    ),
]


@pytest.fixture
def team():
    return [TeamMember(m.display_name, m.handle, m.role) for m in TEAM]


@pytest.fixture
def backlog():
    return [Task.from_dict(t.to_dict()) for t in BACKLOG]


@pytest.fixture
def state(team, backlog):
    return ProjectState(backlog=backlog, team=team)


def wire(user, message, time="12-03-2025 10:15:00"):
    return {"user": user, "message": message, "time": time}


@pytest.fixture
def make_wire():
    return wire
