"""Evaluation harness for LLM-generated patches on C codebases.

Mines single-function commits from a repository, prompts a provider once per
task (no retry loops), splices the generated function into the pre-commit
tree, verifies with a compiler and the clang static analyzer, validates with
the project's test suite, supports two-reviewer triage over HTTP, and
computes success-rate / size / date analytics.
"""

__version__ = "0.1.0"
