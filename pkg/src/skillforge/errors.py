"""Exception hierarchy shared by every module.

All domain failures derive from :class:`SkillforgeError` so the CLI can map
them to exit codes without catching unrelated bugs.
"""


class SkillforgeError(Exception):
    pass


# urdf
class UrdfError(SkillforgeError):
    pass


class MalformedXml(UrdfError):
    pass


class DanglingLinkRef(UrdfError):
    def __init__(self, joint, link):
        super().__init__(f"joint {joint!r} references unknown link {link!r}")
        self.joint = joint
        self.link = link


class KinematicCycle(UrdfError):
    pass


class MissingLimits(UrdfError):
    pass


class DuplicateName(UrdfError):
    pass


class InvalidValue(UrdfError):
    pass


# asset physics
class PhysicsError(SkillforgeError):
    pass


class DegenerateMesh(PhysicsError):
    pass


class UnknownCategory(PhysicsError):
    pass


# reward dsl
class RewardError(SkillforgeError):
    pass


class RewardSyntaxError(RewardError):
    def __init__(self, line, col, expected):
        super().__init__(f"line {line}, col {col}: expected {expected}")
        self.line = line
        self.col = col
        self.expected = expected


class NegativeWeight(RewardError):
    pass


class UnknownTermKind(RewardError):
    pass


# scene / task validation
class ValidationError(SkillforgeError):
    pass


class UnknownAsset(ValidationError):
    def __init__(self, name):
        super().__init__(f"unknown asset {name!r}")
        self.name = name


class UnknownLink(ValidationError):
    def __init__(self, asset, link):
        super().__init__(f"asset {asset!r} has no link {link!r}")
        self.asset = asset
        self.link = link


class UnknownJoint(ValidationError):
    def __init__(self, asset, joint, reason="no such joint"):
        super().__init__(f"asset {asset!r} joint {joint!r}: {reason}")
        self.asset = asset
        self.joint = joint


class TargetOutOfRange(ValidationError):
    def __init__(self, joint, target, limits):
        super().__init__(f"target {target} for joint {joint!r} outside limits {list(limits)}")
        self.joint = joint
        self.target = target
        self.limits = limits


class SceneError(SkillforgeError):
    pass


class EmptyScene(SceneError):
    pass


class OutOfWorkspace(SceneError):
    pass


# task generation
class TaskError(SkillforgeError):
    pass


class NoTaskFound(TaskError):
    pass


class RewardParseError(TaskError):
    def __init__(self, subtask, line, col, message):
        super().__init__(f"subtask {subtask!r} line {line} col {col}: {message}")
        self.subtask = subtask
        self.line = line
        self.col = col
        self.message = message


class TaskFileError(TaskError):
    pass


class SchemaVersionMismatch(TaskFileError):
    pass


# llm gateway
class LLMError(SkillforgeError):
    pass


class EmptyQuery(LLMError):
    pass


class NetworkError(LLMError):
    pass


class HttpStatusError(LLMError):
    def __init__(self, code, body):
        super().__init__(f"HTTP {code}: {body[:200]}")
        self.code = code
        self.body = body[:200]


class MissingApiKey(LLMError):
    pass


class ReplayMiss(LLMError):
    pass


# simulation
class SimError(SkillforgeError):
    pass


class EmptyTerminalBuffer(SimError):
    pass


class NoTargetPart(SimError):
    pass


# training
class TrainingError(SkillforgeError):
    pass


class NonFiniteLoss(TrainingError):
    pass


class BudgetExhausted(TrainingError):
    """Raised only when a caller asks for strict mode; train_subtask flags it otherwise."""


class SequenceAborted(TrainingError):
    def __init__(self, index, reason):
        super().__init__(f"subtask {index} aborted: {reason}")
        self.index = index
        self.reason = reason


class ConfigError(SkillforgeError):
    pass
