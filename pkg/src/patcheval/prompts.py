"""The two fixed instruction templates, rendered from a task."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import PatchEvalError
from .miner import CommitKind, CommitTask


class PromptError(PatchEvalError):
    pass


class MissingFunctionName(PromptError):
    pass


class EmptyMessage(PromptError):
    pass


class TemplateId(Enum):
    FIX = "fix"
    IMPLEMENT = "implement"


STRICT_OUTPUT_SUFFIX = (
    "\nRespond with only the complete function (or the complete file), no commentary."
)


@dataclass
class Prompt:
    text: str
    template_id: TemplateId
    attachments: list[tuple[str, str]] = field(default_factory=list)  # exactly one (name, text)
    task_id: str = ""
    strict_output: bool = False

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "template_id": self.template_id.value,
            "attachment_name": self.attachments[0][0] if self.attachments else None,
            "task_id": self.task_id,
            "strict_output": self.strict_output,
        }


def build_prompt(task: CommitTask, strict_output: bool = False) -> Prompt:
    """Render the fix or implement template with the commit message verbatim.

    No trimming or normalization beyond surrounding whitespace; the
    attachment is the pre-commit context file, unmodified. The optional
    strict-output suffix is off by default and recorded on the prompt.
    """
    message = task.message.strip()
    if not message:
        raise EmptyMessage(f"task {task.task_id} has an empty commit message")
    if not task.function_name:
        raise MissingFunctionName(f"task {task.task_id} has no target function name")

    if task.kind is CommitKind.BUG_FIX:
        template = TemplateId.FIX
        text = (
            "Modify the function in the provided C file such that it fixes "
            f"the following issue: {message} in {task.function_name}"
        )
    else:
        template = TemplateId.IMPLEMENT
        text = (
            f"Implement a function in the provided C file: {task.function_name} "
            f"such that it {message}"
        )
    if strict_output:
        text += STRICT_OUTPUT_SUFFIX
    return Prompt(
        text=text,
        template_id=template,
        attachments=[(task.context_file_path, task.context_file_pre)],
        task_id=task.task_id,
        strict_output=strict_output,
    )
