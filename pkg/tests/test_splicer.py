import pytest

from c_corpus import make_c_file
from patcheval.splicer import (
    AlreadyDefined,
    Ambiguous,
    NotFound,
    SpanStale,
    SpliceMode,
    Unbalanced,
    adopt_whole_file,
    extract_span,
    insert_function,
    locate_function,
    scan_functions,
    splice,
)

# Nine-line file holding exactly one definition; span must cover all of it.
SIZE_FN_FILE = """\
unsigned int json_object_size(const json_t *json)
{
    json_object_t *object;

    if(!json_is_object(json))
        return -1;
    object = json_to_object(json);
    return object->hashtable.size;
}
"""


def test_locate_spans_whole_nine_line_file():
    span = locate_function(SIZE_FN_FILE, "json_object_size")
    assert (span.start_line, span.end_line) == (1, 9)
    assert span.signature_text.startswith("unsigned int json_object_size")


def test_locate_absent_name_raises_not_found():
    with pytest.raises(NotFound):
        locate_function(SIZE_FN_FILE, "missing_fn")


def test_locate_duplicate_under_if_else_is_ambiguous():
    source = (
        "#ifdef FAST\n"
        "int compute(int x) { return x * 2; }\n"
        "#else\n"
        "int compute(int x) { return x + x; }\n"
        "#endif\n"
    )
    with pytest.raises(Ambiguous):
        locate_function(source, "compute")


def test_unbalanced_braces_raise():
    with pytest.raises(Unbalanced):
        scan_functions("int broken(void) {\n  if (1) {\n  return 0;\n}\n")


def test_braces_in_strings_and_comments_ignored():
    source = (
        "/* opening { inside a block comment */\n"
        "static const char *shape = \"{}{{}}\";\n"
        "// close } here\n"
        "int tricky(void)\n"
        "{\n"
        "    char c = '{';\n"
        "    const char *s = \"}/*\";\n"
        "    return c == '{' && s[0] == '}';\n"
        "}\n"
        "/* } stray closer in trailing comment */\n"
    )
    span = locate_function(source, "tricky")
    assert (span.start_line, span.end_line) == (4, 9)


def test_define_with_unbalanced_brace_is_ignored():
    source = "#define BLOCK_BEGIN {\nint fine(void)\n{\n    return 0;\n}\n"
    span = locate_function(source, "fine")
    assert (span.start_line, span.end_line) == (2, 5)


def test_knr_definition_located():
    source = "long\nadd_pair(a, b)\nint a;\nint b;\n{\n    return a + b;\n}\n"
    span = locate_function(source, "add_pair")
    assert (span.start_line, span.end_line) == (1, 7)


def test_prototype_is_not_a_definition():
    source = "int only_proto(int x);\nint real(void)\n{\n    return only_proto(1);\n}\n"
    assert [s.name for s in scan_functions(source)] == ["real"]


def test_identity_splice_is_byte_exact():
    span = locate_function(SIZE_FN_FILE, "json_object_size")
    body = extract_span(SIZE_FN_FILE, span)
    out = splice(SIZE_FN_FILE, span, body)
    assert out.text == SIZE_FN_FILE
    assert out.mode is SpliceMode.REPLACE


def test_splice_changes_nothing_outside_span():
    source = "int keep_top; /* header */\n" + SIZE_FN_FILE + "int keep_bottom;\n"
    span = locate_function(source, "json_object_size")
    replacement = "unsigned int json_object_size(const json_t *json)\n{\n    return 0;\n}\n"
    out = splice(source, span, replacement).text
    lines = out.splitlines(keepends=True)
    assert lines[0] == "int keep_top; /* header */\n"
    assert lines[-1] == "int keep_bottom;\n"
    assert "return 0;" in out and "hashtable.size" not in out


def test_splice_normalizes_trailing_newline_to_file_convention():
    span = locate_function(SIZE_FN_FILE, "json_object_size")
    replacement = "unsigned int json_object_size(const json_t *json)\n{\n    return 0;\n}"
    out = splice(SIZE_FN_FILE, span, replacement).text
    assert out.endswith("}\n")

    no_trailing = SIZE_FN_FILE.rstrip("\n")
    span2 = locate_function(no_trailing, "json_object_size")
    out2 = splice(no_trailing, span2, replacement + "\n").text
    assert not out2.endswith("\n")


def test_splice_with_stale_span_rejected():
    span = locate_function(SIZE_FN_FILE, "json_object_size")
    moved = "/* new first line */\n" + SIZE_FN_FILE
    with pytest.raises(SpanStale):
        splice(moved, span, "whatever")


def test_insert_into_empty_file():
    fn = "int fresh(void)\n{\n    return 7;\n}"
    out = insert_function("", fn)
    assert out.text == fn + "\n"
    assert out.mode is SpliceMode.INSERT


def test_insert_duplicate_name_rejected():
    with pytest.raises(AlreadyDefined):
        insert_function(SIZE_FN_FILE, SIZE_FN_FILE)


def test_insert_adds_function_plus_separator():
    base_lines = ["int filler_%d;" % i for i in range(99)]
    base = "\n".join(base_lines) + "\nint last(void) { return 0; }\n"
    assert base.count("\n") == 100
    fn = "\n".join(
        ["static int nine_liner(void)", "{", "    int a = 1;", "    int b = 2;",
         "    int c = 3;", "    int d = 4;", "    int e = 5;", "    return a + b + c + d + e;", "}"]
    )
    out = insert_function(base, fn)
    assert out.text.count("\n") == 110  # 100 + 9 + 1 separator
    assert out.text.startswith(base)


def test_insert_before_trailing_endif_footer():
    base = "#ifdef UNIT\nint unit_only(void) { return 1; }\n#endif\n"
    fn = "int added(void)\n{\n    return 2;\n}"
    out = insert_function(base, fn)
    assert out.text.rstrip().endswith("#endif")
    assert out.text.index("added") < out.text.rindex("#endif")


def test_insert_unbalanced_rejected():
    with pytest.raises(Unbalanced):
        insert_function("", "int broken(void) {\n    return 1;\n")


def test_adopt_identical_candidate_has_empty_delta():
    span = locate_function(SIZE_FN_FILE, "json_object_size")
    out = adopt_whole_file(SIZE_FN_FILE, SIZE_FN_FILE, "json_object_size", span)
    assert out.mode is SpliceMode.WHOLE_FILE_ADOPT
    assert out.structure_delta is not None and out.structure_delta.is_empty()


SWITCH_FILE = """\
int classify(char c)
{
    switch (c) {
    case 'r': return 1;
    case 't': return 2;
    case 'u': return 3;
    case '\\n': return 4;
    case '\\r': return 5;
    default: return 0;
    }
}

static int untouched_helper(void)
{
    return 42;
}
"""


def test_adopt_reports_deleted_case_labels_and_functions():
    candidate = "\n".join(
        line
        for line in SWITCH_FILE.splitlines()
        if "case 'u'" not in line and "case '\\n'" not in line and "case '\\r'" not in line
    ) + "\n"
    candidate = candidate.replace(
        "static int untouched_helper(void)\n{\n    return 42;\n}\n", ""
    )
    span = locate_function(SWITCH_FILE, "classify")
    out = adopt_whole_file(SWITCH_FILE, candidate, "classify", span)
    delta = out.structure_delta
    assert delta.deleted_functions == ["untouched_helper"]
    assert sorted(delta.deleted_case_labels) == sorted(["'u'", "'\\n'", "'\\r'"])
    assert delta.changed_outside_target is True


def test_adopt_confined_to_target_span():
    candidate = SWITCH_FILE.replace("case 't': return 2;", "case 't': return 20;")
    span = locate_function(SWITCH_FILE, "classify")
    out = adopt_whole_file(SWITCH_FILE, candidate, "classify", span)
    assert out.structure_delta.changed_outside_target is False
    assert out.structure_delta.deleted_case_labels == []


@pytest.mark.parametrize("seed", range(12))
def test_generated_corpus_roundtrip(seed):
    text, names = make_c_file(seed)
    found = {s.name for s in scan_functions(text)}
    assert set(names) <= found
    for name in names:
        span = locate_function(text, name)
        body = extract_span(text, span)
        assert splice(text, span, body).text == text
