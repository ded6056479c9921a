import shutil

import pytest

from patcheval.verifier import (
    AnalyzerProfile,
    BuildProfile,
    BuildToolMissing,
    Diagnostic,
    IssueCategory,
    analyze_tree,
    build_tree,
    categorize,
    category_name,
    enabled_checkers,
    parse_compiler_diagnostics,
    validate_rules,
    verify,
)

pytestmark = pytest.mark.skipif(
    shutil.which("clang") is None or shutil.which("cc") is None,
    reason="requires cc and clang",
)

NULL_DEREF = "int main(void) {\n    int *p = 0;\n    *p = 1;\n    return 0;\n}\n"

USE_AFTER_FREE = (
    "#include <stdlib.h>\n"
    "int main(void) {\n"
    "    int *p = malloc(sizeof(int));\n"
    "    if (!p) return 1;\n"
    "    free(p);\n"
    "    return *p;\n"
    "}\n"
)

UNINITIALIZED = "int main(void) {\n    int x;\n    return x + 1;\n}\n"

DOUBLE_FREE = (
    "#include <stdlib.h>\n"
    "int main(void) {\n"
    "    int *p = malloc(4);\n"
    "    free(p);\n"
    "    free(p);\n"
    "    return 0;\n"
    "}\n"
)

HELLO = "int main(void) {\n    return 0;\n}\n"


def write_tree(tmp_path, name, content):
    d = tmp_path / name
    d.mkdir()
    (d / "main.c").write_text(content)
    return d


BUILD = BuildProfile(build_cmd="cc -Werror=implicit-function-declaration -o prog main.c")
ANALYZE = AnalyzerProfile(sources=["*.c"])


def test_build_success_and_failure(tmp_path):
    good = write_tree(tmp_path, "good", HELLO)
    assert build_tree(good, BUILD).ok is True
    bad = write_tree(tmp_path, "bad", "int main(void) { return undefined_thing(); }\n")
    outcome = build_tree(bad, BUILD)
    assert outcome.ok is False
    assert "implicit declaration" in outcome.stderr


def test_build_tool_missing(tmp_path):
    tree = write_tree(tmp_path, "t", HELLO)
    with pytest.raises(BuildToolMissing):
        build_tree(tree, BuildProfile(build_cmd="definitely-not-a-compiler main.c"))


def test_analyze_clean_tree_is_empty(tmp_path):
    tree = write_tree(tmp_path, "clean", HELLO)
    assert analyze_tree(tree, ANALYZE) == []


# Golden analyzer diagnostics for the three seeded defect fixtures; the
# checker ids are pinned against clang's stable checker names.
@pytest.mark.parametrize(
    "source,checker,category",
    [
        (NULL_DEREF, "core.NullDereference", IssueCategory.NULL_DEREFERENCE),
        (USE_AFTER_FREE, "unix.Malloc", IssueCategory.USE_AFTER_FREE),
        (UNINITIALIZED, "core.UndefinedBinaryOperatorResult", IssueCategory.UNINITIALIZED_VARIABLE),
        (DOUBLE_FREE, "unix.Malloc", IssueCategory.DOUBLE_FREE),
    ],
)
def test_seeded_defects_map_to_their_category(tmp_path, source, checker, category):
    tree = write_tree(tmp_path, "seeded", source)
    diags = analyze_tree(tree, ANALYZE)
    assert len(diags) == 1
    assert diags[0].checker_id == checker
    assert categorize(diags[0]) is category


def test_diagnostics_stable_across_reruns(tmp_path):
    tree = write_tree(tmp_path, "stable", NULL_DEREF)
    first = [d.to_dict() for d in analyze_tree(tree, ANALYZE)]
    second = [d.to_dict() for d in analyze_tree(tree, ANALYZE)]
    assert first == second


def test_categorize_frontend_messages():
    undeclared = Diagnostic("compiler", "frontend", "use of undeclared identifier 'hashtable_size'", "f.c", 3, "error")
    assert categorize(undeclared) is IssueCategory.UNDECLARED_IDENTIFIER
    member = Diagnostic("compiler", "frontend", "no member named 'head' in 'struct deque'", "f.c", 9, "error")
    assert categorize(member) is IssueCategory.UNDECLARED_IDENTIFIER
    implicit = Diagnostic("compiler", "frontend", "implicit declaration of function 'foo' is invalid in C99", "f.c", 2, "error")
    assert categorize(implicit) is IssueCategory.UNDECLARED_IDENTIFIER
    syntax = Diagnostic("compiler", "frontend", "expected '}'", "f.c", 11, "error")
    assert categorize(syntax) is IssueCategory.SYNTAX_SEMANTIC
    cast = Diagnostic(
        "compiler", "frontend",
        "incompatible pointer to integer conversion assigning to 'char' from 'char *'",
        "f.c", 4, "error",
    )
    assert categorize(cast) is IssueCategory.UNSAFE_CAST


def test_categorize_is_total_over_enabled_checkers():
    problems = validate_rules()
    assert problems == []
    for checker in enabled_checkers():
        diag = Diagnostic("analyzer", checker, "synthetic message", "f.c", 1)
        name = category_name(categorize(diag))
        assert name in {c.value for c in IssueCategory} | {"Uncategorized"}


def test_categorize_never_emits_empty_partial():
    for checker in enabled_checkers():
        diag = Diagnostic("analyzer", checker, "synthetic message", "f.c", 1)
        assert categorize(diag) is not IssueCategory.EMPTY_PARTIAL


def test_parse_compiler_diagnostics():
    stderr = (
        "main.c:3:12: error: use of undeclared identifier 'foo'\n"
        "    return foo;\n"
        "           ^\n"
        "main.c:5:1: warning: unused variable 'x' [-Wunused-variable]\n"
        "2 problems generated.\n"
    )
    diags = parse_compiler_diagnostics(stderr)
    assert [(d.line, d.severity) for d in diags] == [(3, "error"), (5, "warning")]


def test_verify_self_comparison_has_zero_delta(tmp_path):
    base = write_tree(tmp_path, "base", NULL_DEREF)
    cand = write_tree(tmp_path, "cand", NULL_DEREF)
    report = verify(cand, base, BUILD, ANALYZE)
    assert report.issue_delta == {}
    assert report.compile_outcome.ok


def test_verify_added_null_deref_delta(tmp_path):
    base = write_tree(tmp_path, "base", HELLO)
    cand = write_tree(tmp_path, "cand", NULL_DEREF)
    report = verify(cand, base, BUILD, ANALYZE)
    assert report.issue_delta == {"NullDereference": 1}


def test_verify_compile_error_keeps_frontend_issues(tmp_path):
    base = write_tree(tmp_path, "base", HELLO)
    cand = write_tree(tmp_path, "cand", "int main(void) { return hashtable_size(0); }\n")
    report = verify(cand, base, BUILD, ANALYZE)
    assert report.compile_outcome.ok is False
    assert report.category_counts().get("UndeclaredIdentifier") == 1
