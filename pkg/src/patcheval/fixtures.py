"""A miniature deterministic corpus: seven mini-projects with git history,
canned provider responses, tiny exit-code test suites, and a manifest of
expected outcomes.

Each case reconstructs a classic single-function patch scenario (wrong
index, use-after-free, null key, size getter, missed release, deleted
switch cases, overflow guard) as a compilable program; surrounding
scaffolding is authored here and marked as such in the sources.
"""

from __future__ import annotations

import json
import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .errors import PatchEvalError


class OutDirNotWritable(PatchEvalError):
    pass


GIT_ENV = {
    "GIT_AUTHOR_NAME": "Fixture Author",
    "GIT_AUTHOR_EMAIL": "fixture@example.invalid",
    "GIT_COMMITTER_NAME": "Fixture Author",
    "GIT_COMMITTER_EMAIL": "fixture@example.invalid",
    "GIT_CONFIG_GLOBAL": "/dev/null",
    "GIT_CONFIG_SYSTEM": "/dev/null",
}

PROVIDERS = [
    "sim_correct",
    "sim_empty",
    "sim_partial",
    "sim_undeclared",
    "sim_deletion",
    "sim_partialfix",
    "sim_wrong",
    "sim_altfix",
]

CC_CMD = "cc -Werror=implicit-function-declaration -o test_prog {sources}"


@dataclass
class FixtureCase:
    name: str
    source_file: str
    header_file: str
    test_file: str
    function_name: str
    message: str
    pre_date: str
    fix_date: str
    header: str
    prologue: str
    pre_fn: str
    human_fn: str
    epilogue: str
    test_source: str
    responses: dict[str, str] = field(default_factory=dict)  # provider -> raw response text
    expectations: dict[str, dict] = field(default_factory=dict)  # provider -> expected row

    @property
    def pre_source(self) -> str:
        return self.prologue + self.pre_fn + self.epilogue

    @property
    def post_source(self) -> str:
        return self.prologue + self.human_fn + self.epilogue


def _fenced(code: str, prose_before: str = "Here is the updated function:",
            prose_after: str = "This resolves the issue described in the commit message.") -> str:
    return f"{prose_before}\n\n```c\n{code}```\n\n{prose_after}\n"


def _truncate(code: str, fraction: float = 0.6) -> str:
    return code[: int(len(code) * fraction)]


ROW_CORRECT = {
    "compile": "ok",
    "categories": {},
    "test": "pass",
    "suggestion": "IdenticalToHuman",
    "verdict": "IdenticalToHuman",
}
ROW_EMPTY = {
    "compile": "skipped",
    "categories": {"EmptyPartial": 1},
    "test": "skipped",
    "suggestion": "EmptyPatch",
    "verdict": "EmptyPatch",
}
ROW_PARTIAL = {
    "compile": "skipped",
    "categories": {"EmptyPartial": 1},
    "test": "skipped",
    "suggestion": None,
    "verdict": "EmptyPatch",
}


# --- case 1: wrong index in a ring-buffer deque ------------------------------------

_DEQUE_HEADER = """\
#ifndef DEQUE_H
#define DEQUE_H

#include <stddef.h>

struct deque {
    void **buffer;
    size_t capacity;   /* power of two */
    size_t first;
    size_t last;
    size_t size;
};

int deque_init(struct deque *deque, size_t capacity);
int deque_add_last(struct deque *deque, void *element);
int deque_remove_first(struct deque *deque, void **out);
int deque_remove_at(struct deque *deque, size_t index, void **out);

#endif
"""

_DEQUE_PROLOGUE = """\
/* Miniature ring-buffer deque; storage is caller-visible for the checks. */
#include <stdlib.h>
#include "deque.h"

int deque_init(struct deque *deque, size_t capacity)
{
    deque->buffer = malloc(capacity * sizeof(void *));
    if (!deque->buffer)
        return -1;
    deque->capacity = capacity;
    deque->first = 0;
    deque->last = 0;
    deque->size = 0;
    return 0;
}

int deque_add_last(struct deque *deque, void *element)
{
    if (deque->size >= deque->capacity)
        return -1;
    deque->buffer[deque->last & (deque->capacity - 1)] = element;
    deque->last++;
    deque->size++;
    return 0;
}

int deque_remove_first(struct deque *deque, void **out)
{
    if (deque->size == 0)
        return -1;
    if (out)
        *out = deque->buffer[deque->first & (deque->capacity - 1)];
    deque->first++;
    deque->size--;
    return 0;
}

"""

_DEQUE_PRE_FN = """\
int deque_remove_at(struct deque *deque, size_t index, void **out)
{
    const size_t c = deque->capacity - 1;
    const size_t l = deque->last & c;
    const size_t f = deque->first & c;
    const size_t p = (deque->first + index) & c;
    void *removed  = deque->buffer[index];

    if (f == l && deque->size == 0)
        return -1;
    if (out)
        *out = removed;
    for (size_t i = p; i != ((deque->last - 1) & c); i = (i + 1) & c)
        deque->buffer[i] = deque->buffer[(i + 1) & c];
    deque->last--;
    deque->size--;
    return 0;
}
"""

_DEQUE_HUMAN_FN = _DEQUE_PRE_FN.replace("deque->buffer[index];", "deque->buffer[p];")

_DEQUE_UNDECLARED_FN = """\
int deque_remove_at(struct deque *deque, size_t index, void **out)
{
    size_t p = (deque->head + index) & (deque->capacity - 1);

    if (out) {
        *out = deque->buffer[p];
    }
    for (size_t i = p; i != ((deque->last - 1) & (deque->capacity - 1)); i = (i + 1) & (deque->capacity - 1))
        deque->buffer[i] = deque->buffer[(i + 1) & (deque->capacity - 1)];
    deque->last--;
    deque->size--;
    return 0;
}
"""

_DEQUE_TEST = """\
/* Behavior checks; exits nonzero on the first mismatch. */
#include <stdio.h>
#include "deque.h"

static const char *items[] = {"e0", "e1", "e2", "e3", "e4", "e5"};

int main(void)
{
    struct deque dq;
    void *out = 0;

    if (deque_init(&dq, 8) != 0) return 1;
    for (int i = 0; i < 6; i++)
        if (deque_add_last(&dq, (void *)items[i]) != 0) return 2;
    if (deque_remove_first(&dq, &out) != 0 || out != (void *)items[0]) return 3;
    if (deque_remove_first(&dq, &out) != 0 || out != (void *)items[1]) return 4;
    if (deque_remove_at(&dq, 1, &out) != 0) return 5;
    if (out != (void *)items[3]) {
        fprintf(stderr, "remove_at returned the wrong element\\n");
        return 6;
    }
    if (deque_remove_at(&dq, 0, &out) != 0 || out != (void *)items[2]) return 7;
    if (dq.size != 2) return 8;
    return 0;
}
"""


def _case_deque() -> FixtureCase:
    case = FixtureCase(
        name="deque",
        source_file="deque.c",
        header_file="deque.h",
        test_file="test_deque.c",
        function_name="deque_remove_at",
        message=(
            "The deque_remove_at function was returning an incorrect element in "
            "certain situations. The correct element is the one at index p"
        ),
        pre_date="2024-01-05",
        fix_date="2024-01-15",
        header=_DEQUE_HEADER,
        prologue=_DEQUE_PROLOGUE,
        pre_fn=_DEQUE_PRE_FN,
        human_fn=_DEQUE_HUMAN_FN,
        epilogue="",
        test_source=_DEQUE_TEST,
    )
    case.responses = {
        "sim_correct": _fenced(case.human_fn),
        "sim_empty": _fenced(case.pre_fn, "The function already handles this correctly:",
                             "No further changes are required."),
        "sim_undeclared": _fenced(_DEQUE_UNDECLARED_FN),
        "sim_partial": _fenced(_truncate(case.human_fn)),
    }
    case.expectations = {
        "sim_correct": dict(ROW_CORRECT),
        "sim_empty": dict(ROW_EMPTY),
        "sim_partial": dict(ROW_PARTIAL),
        "sim_undeclared": {
            "compile": "error",
            "categories": {"UndeclaredIdentifier": 1},
            "test": "skipped",
            "suggestion": "UncompilableUndeclared",
            "verdict": "UncompilableUndeclared",
        },
    }
    return case


# --- case 2: use-after-free in the error path ----------------------------------------

_JSONOBJ_HEADER = """\
#ifndef JSONVAL_H
#define JSONVAL_H

#include <stdlib.h>

typedef struct {
    int refcount;
    long value;
} json_t;

struct state {
    char text[128];
    int failed;
};

#define TABLE_CAPACITY 4

struct table {
    char *keys[TABLE_CAPACITY];
    json_t *values[TABLE_CAPACITY];
    int count;
};

#define jsonp_free(ptr) free(ptr)

char *jsonp_strdup(const char *s);
void json_decref(json_t *value);
int hashtable_add(struct table *t, char *key, json_t *value);
void set_error(struct state *s, const char *source, const char *key);
int object_set(struct state *s, struct table *t, const char *name, json_t *value, int ours);

#endif
"""

_JSONOBJ_PROLOGUE = """\
/* Miniature keyed store exercising the error-reporting path. */
#include <stdio.h>
#include <string.h>
#include "jsonval.h"

char *jsonp_strdup(const char *s)
{
    size_t n = strlen(s) + 1;
    char *copy = malloc(n);
    if (copy)
        memcpy(copy, s, n);
    return copy;
}

void json_decref(json_t *value)
{
    if (value && value->refcount > 0)
        value->refcount--;
}

int hashtable_add(struct table *t, char *key, json_t *value)
{
    if (t->count >= TABLE_CAPACITY)
        return -1;
    t->keys[t->count] = key;
    t->values[t->count] = value;
    t->count++;
    return 0;
}

void set_error(struct state *s, const char *source, const char *key)
{
    s->failed = 1;
    snprintf(s->text, sizeof(s->text), "%s: unable to add key \\"%s\\"", source, key);
}

"""

_JSONOBJ_ERROR_BLOCK_PRE = """\
    if (hashtable_add(t, key, value)) {
        if (ours)
            jsonp_free(key);
        set_error(s, "<internal>", key);
        goto error;
    }
"""

_JSONOBJ_ERROR_BLOCK_HUMAN = """\
    if (hashtable_add(t, key, value)) {
        set_error(s, "<internal>", key);
        if (ours)
            jsonp_free(key);
        goto error;
    }
"""

_JSONOBJ_ERROR_BLOCK_WRONG = """\
    if (hashtable_add(t, key, value)) {
        if (ours)
            jsonp_free(key);
        json_decref(value);
        set_error(s, "<internal>", key);
        goto error;
    }
"""

_JSONOBJ_FN_TEMPLATE = """\
int object_set(struct state *s, struct table *t, const char *name, json_t *value, int ours)
{{
    char *key;

    if (!name)
        return -1;
    key = jsonp_strdup(name);
    if (!key)
        return -1;
{block}    return 0;
error:
    json_decref(value);
    return -1;
}}
"""

_JSONOBJ_TEST = """\
#include <string.h>
#include "jsonval.h"

int main(void)
{
    struct state st = {{0}, 0};
    struct table tab = {{0}, {0}, 0};
    json_t v1 = {1, 41}, v2 = {1, 42};

    if (object_set(&st, &tab, "alpha", &v1, 1) != 0) return 1;
    if (object_set(&st, &tab, "beta", &v2, 1) != 0) return 2;
    if (tab.count != 2) return 3;
    if (strcmp(tab.keys[0], "alpha") != 0) return 4;
    if (st.failed) return 5;
    return 0;
}
"""


def _case_jsonobj() -> FixtureCase:
    case = FixtureCase(
        name="jsonobj",
        source_file="jsonobj.c",
        header_file="jsonval.h",
        test_file="test_jsonobj.c",
        function_name="object_set",
        message="Fix a use after free",
        pre_date="2024-02-01",
        fix_date="2024-02-10",
        header=_JSONOBJ_HEADER,
        prologue=_JSONOBJ_PROLOGUE,
        pre_fn=_JSONOBJ_FN_TEMPLATE.format(block=_JSONOBJ_ERROR_BLOCK_PRE),
        human_fn=_JSONOBJ_FN_TEMPLATE.format(block=_JSONOBJ_ERROR_BLOCK_HUMAN),
        epilogue="",
        test_source=_JSONOBJ_TEST,
    )
    wrong_fn = _JSONOBJ_FN_TEMPLATE.format(block=_JSONOBJ_ERROR_BLOCK_WRONG)
    case.responses = {
        "sim_correct": _fenced(case.human_fn),
        "sim_empty": _fenced(case.pre_fn, "After reviewing the code, it is already safe:",
                             "No modification is necessary."),
        "sim_wrong": _fenced(wrong_fn, "The reference count of value must be decremented:",
                             "This releases the value if adding the key fails."),
    }
    case.expectations = {
        "sim_correct": dict(ROW_CORRECT),
        "sim_empty": dict(ROW_EMPTY),
        "sim_wrong": {
            "compile": "ok",
            "categories": {"UseAfterFree": 1},
            "test": "pass",  # the suite only drives the happy path
            "suggestion": None,
            "verdict": "WrongSolution",
        },
    }
    return case


# --- case 3: null key dereference in a chained hash table ------------------------------

_HASHTAB_HEADER = """\
#ifndef HASHTAB_H
#define HASHTAB_H

#define TABLE_BUCKETS 8
#define TABLE_POOL 32

struct entry {
    void *key;
    int value;
    struct entry *next;
};

struct table {
    struct entry *buckets[TABLE_BUCKETS];
    struct entry pool[TABLE_POOL];
    int used;
    int (*key_cmp)(const void *, const void *);
};

void table_init(struct table *table);
int table_put(struct table *table, void *key, int value);
int table_get(const struct table *table, const void *key, int *out);

#endif
"""

_HASHTAB_PROLOGUE = """\
/* Fixed-pool chained hash table with a comparator pointer. */
#include <stddef.h>
#include <string.h>
#include "hashtab.h"

static int compare_keys(const void *a, const void *b)
{
    return strcmp((const char *)a, (const char *)b);
}

static unsigned long hash_key(const void *key)
{
    if (!key)
        return 0;
    return (unsigned long)((const unsigned char *)key)[0];
}

void table_init(struct table *table)
{
    memset(table, 0, sizeof(*table));
    table->key_cmp = compare_keys;
}

"""

_HASHTAB_PUT_PRE = """\
int table_put(struct table *table, void *key, int value)
{
    unsigned long slot = hash_key(key) % TABLE_BUCKETS;
    struct entry *replace = table->buckets[slot];
    struct entry *fresh;

    while (replace) {
        if (table->key_cmp(replace->key, key) == 0) {
            replace->value = value;
            return 0;
        }
        replace = replace->next;
    }
    if (table->used >= TABLE_POOL)
        return -1;
    fresh = &table->pool[table->used++];
    fresh->key = key;
    fresh->value = value;
    fresh->next = table->buckets[slot];
    table->buckets[slot] = fresh;
    return 0;
}
"""

_HASHTAB_PUT_HUMAN = _HASHTAB_PUT_PRE.replace(
    """    while (replace) {
        if (table->key_cmp(replace->key, key) == 0) {""",
    """    while (replace) {
        void *rk = replace->key;

        if (rk && table->key_cmp(rk, key) == 0) {""",
)

_HASHTAB_EPILOGUE = """\

int table_get(const struct table *table, const void *key, int *out)
{
    unsigned long slot = hash_key(key) % TABLE_BUCKETS;
    const struct entry *walk = table->buckets[slot];

    while (walk) {
        if (walk->key == key || (walk->key && key && table->key_cmp(walk->key, key) == 0)) {
            *out = walk->value;
            return 0;
        }
        walk = walk->next;
    }
    return -1;
}
"""

_HASHTAB_TEST = """\
#include "hashtab.h"

int main(void)
{
    struct table tab;
    int out = 0;

    table_init(&tab);
    if (table_put(&tab, 0, 11) != 0) return 1;
    if (table_put(&tab, (void *)"Hat", 22) != 0) return 2;
    if (table_get(&tab, "Hat", &out) != 0 || out != 22) return 3;
    if (table_put(&tab, (void *)"Hat", 33) != 0) return 4;
    if (table_get(&tab, "Hat", &out) != 0 || out != 33) return 5;
    if (table_get(&tab, 0, &out) != 0 || out != 11) return 6;
    return 0;
}
"""


def _case_hashtab() -> FixtureCase:
    case = FixtureCase(
        name="hashtab",
        source_file="hashtab.c",
        header_file="hashtab.h",
        test_file="test_hashtab.c",
        function_name="table_put",
        message=(
            "Fixes a bug that would be triggered by add, get and remove hashtable "
            "operations when a key whose hash value would resolve to table index 0 "
            "was used while NULL key was already present in the table"
        ),
        pre_date="2024-03-10",
        fix_date="2024-03-20",
        header=_HASHTAB_HEADER,
        prologue=_HASHTAB_PROLOGUE,
        pre_fn=_HASHTAB_PUT_PRE,
        human_fn=_HASHTAB_PUT_HUMAN,
        epilogue=_HASHTAB_EPILOGUE,
        test_source=_HASHTAB_TEST,
    )
    case.responses = {
        # Whole-file response: exercises the adopt path end to end.
        "sim_correct": _fenced(case.post_source, "Here is the complete corrected file:"),
        "sim_empty": _fenced(case.pre_fn, "The lookup loop is already null-safe:",
                             "No changes applied."),
    }
    case.expectations = {
        "sim_correct": dict(ROW_CORRECT),
        "sim_empty": dict(ROW_EMPTY),
    }
    return case


# --- case 4: implement a size getter (feature enhancement) ------------------------------

_JSONSIZE_HEADER = """\
#ifndef JSONSIZE_H
#define JSONSIZE_H

#define JSON_OBJECT_TYPE 1

typedef struct {
    int type;
} json_t;

typedef struct {
    unsigned int size;
    unsigned int capacity;
} hashtable_t;

typedef struct {
    json_t json;
    hashtable_t hashtable;
} json_object_t;

#define json_is_object(j) ((j) && (j)->type == JSON_OBJECT_TYPE)
#define json_to_object(j) ((json_object_t *)(j))

json_t *json_object_init(json_object_t *object);
int json_object_add(json_t *json);
unsigned int json_object_size(const json_t *json);

#endif
"""

_JSONSIZE_PRE = """\
/* Miniature typed-object container; the public API is declared ahead in
 * the header. */
#include "jsonsize.h"

json_t *json_object_init(json_object_t *object)
{
    object->json.type = JSON_OBJECT_TYPE;
    object->hashtable.size = 0;
    object->hashtable.capacity = 8;
    return &object->json;
}

int json_object_add(json_t *json)
{
    json_object_t *object;

    if (!json_is_object(json))
        return -1;
    object = json_to_object(json);
    if (object->hashtable.size >= object->hashtable.capacity)
        return -1;
    object->hashtable.size++;
    return 0;
}
"""

_JSONSIZE_HUMAN_FN = """\
unsigned int json_object_size(const json_t *json)
{
    json_object_t *object;

    if(!json_is_object(json))
        return -1;

    object = json_to_object(json);
    return object->hashtable.size;
}
"""

_JSONSIZE_UNDECLARED_FN = """\
unsigned int json_object_size(const json_t *json)
{
    if (!json_is_object(json))
        return 0;

    json_object_t *object = json_to_object(json);

    return hashtable_size(&object->hashtable);
}
"""

_JSONSIZE_WRONG_FN = """\
unsigned int json_object_size(const json_t *json)
{
    if (!json_is_object(json))
        return 0;
    return json_to_object(json)->hashtable.capacity;
}
"""

_JSONSIZE_TEST = """\
#include "jsonsize.h"

int main(void)
{
    json_object_t storage;
    json_t not_object = {0};
    json_t *json = json_object_init(&storage);

    if (json_object_add(json) != 0) return 1;
    if (json_object_add(json) != 0) return 2;
    if (json_object_size(json) != 2) return 3;
    if (json_object_size(&not_object) != 0
            && json_object_size(&not_object) != (unsigned int)-1)
        return 4;
    return 0;
}
"""


def _case_jsonsize() -> FixtureCase:
    case = FixtureCase(
        name="jsonsize",
        source_file="jsonsize.c",
        header_file="jsonsize.h",
        test_file="test_jsonsize.c",
        function_name="json_object_size",
        message=(
            "Returns the number of elements in *object*, or 0 if *object* is not "
            "a JSON object"
        ),
        pre_date="2024-03-25",
        fix_date="2024-04-05",
        header=_JSONSIZE_HEADER,
        prologue=_JSONSIZE_PRE,
        pre_fn="",
        human_fn="\n" + _JSONSIZE_HUMAN_FN,  # appended after a separator line
        epilogue="",
        test_source=_JSONSIZE_TEST,
    )
    case.responses = {
        "sim_correct": _fenced(_JSONSIZE_HUMAN_FN),
        "sim_empty": (
            "The provided file already contains all required functionality, "
            "so no new code is needed.\n"
        ),
        "sim_undeclared": _fenced(_JSONSIZE_UNDECLARED_FN),
        "sim_wrong": _fenced(_JSONSIZE_WRONG_FN),
    }
    case.expectations = {
        "sim_correct": dict(ROW_CORRECT),
        "sim_empty": dict(ROW_EMPTY),
        "sim_undeclared": {
            "compile": "error",
            "categories": {"UndeclaredIdentifier": 1},
            "test": "skipped",
            "suggestion": "UncompilableUndeclared",
            "verdict": "UncompilableUndeclared",
        },
        "sim_wrong": {
            "compile": "ok",
            "categories": {},
            "test": "fail",
            "suggestion": None,
            "verdict": "WrongSolution",
        },
    }
    return case


# --- case 5: missed reference release on a fault path -----------------------------------

_REFLIST_HEADER = """\
#ifndef REFLIST_H
#define REFLIST_H

#define NODE_SLOTS 16

struct node {
    int key;
    int refs;
    int stale;
};

struct list {
    struct node nodes[NODE_SLOTS];
    int refs_taken;
    int refs_released;
};

void list_init(struct list *list);
struct node *node_fetch(struct list *list, int key);
void release_ref(struct list *list, struct node *node);
void list_mark_stale(struct list *list, int key);
int list_insert(struct list *list, int key);
int list_ref_balance(const struct list *list);

#endif
"""

_REFLIST_PROLOGUE = """\
/* Slot-addressed nodes with manual reference counting. */
#include <string.h>
#include "reflist.h"

void list_init(struct list *list)
{
    memset(list, 0, sizeof(*list));
}

struct node *node_fetch(struct list *list, int key)
{
    struct node *node;

    if (key < 0 || key >= NODE_SLOTS)
        return 0;
    node = &list->nodes[key];
    node->key = key;
    node->refs++;
    list->refs_taken++;
    return node;
}

void release_ref(struct list *list, struct node *node)
{
    if (node && node->refs > 0) {
        node->refs--;
        list->refs_released++;
    }
}

void list_mark_stale(struct list *list, int key)
{
    if (key >= 0 && key < NODE_SLOTS)
        list->nodes[key].stale = 1;
}

static struct node *node_repair(struct list *list, int key)
{
    struct node *node = node_fetch(list, key);

    if (node)
        node->stale = 0;
    return node;
}

"""

_REFLIST_PRE_FN = """\
int list_insert(struct list *list, int key)
{
    struct node *next;
    struct node *prev;

    next = node_fetch(list, key + 1);
    if (!next)
        return -1;
    prev = node_fetch(list, key - 1);
    if (!prev) {
        return -1;
    }
    if (prev->stale) {
        prev = node_repair(list, key - 1);
        if (!prev) {
            release_ref(list, next);
            return -1;
        }
    }
    release_ref(list, prev);
    release_ref(list, next);
    return 0;
}
"""

_REFLIST_HUMAN_FN = _REFLIST_PRE_FN.replace(
    """    if (!prev) {
        return -1;
    }
    if (prev->stale) {
        prev = node_repair(list, key - 1);""",
    """    if (!prev) {
        release_ref(list, next);
        return -1;
    }
    if (prev->stale) {
        release_ref(list, prev);
        prev = node_repair(list, key - 1);""",
)

_REFLIST_PARTIAL_FN = _REFLIST_PRE_FN.replace(
    """    if (!prev) {
        return -1;
    }""",
    """    if (!prev) {
        release_ref(list, next);
        return -1;
    }""",
)

_REFLIST_EPILOGUE = """\

int list_ref_balance(const struct list *list)
{
    return list->refs_taken - list->refs_released;
}
"""

_REFLIST_TEST = """\
#include "reflist.h"

int main(void)
{
    struct list list;

    list_init(&list);
    if (list_insert(&list, 3) != 0) return 1;
    if (list_insert(&list, 0) != -1) return 2;
    list_mark_stale(&list, 4);
    if (list_insert(&list, 5) != 0) return 3;
    if (list_ref_balance(&list) != 0) return 4;
    return 0;
}
"""


def _case_reflist() -> FixtureCase:
    case = FixtureCase(
        name="reflist",
        source_file="reflist.c",
        header_file="reflist.h",
        test_file="test_reflist.c",
        function_name="list_insert",
        message="fixed a memory leak triggered by a fault path. the node was overretained",
        pre_date="2024-06-20",
        fix_date="2024-07-04",
        header=_REFLIST_HEADER,
        prologue=_REFLIST_PROLOGUE,
        pre_fn=_REFLIST_PRE_FN,
        human_fn=_REFLIST_HUMAN_FN,
        epilogue=_REFLIST_EPILOGUE,
        test_source=_REFLIST_TEST,
    )
    case.responses = {
        "sim_correct": _fenced(case.human_fn),
        "sim_partialfix": _fenced(
            _REFLIST_PARTIAL_FN,
            "The fault path must release the reference it took:",
            "The leak on the fault path is now fixed.",
        ),
    }
    case.expectations = {
        "sim_correct": dict(ROW_CORRECT),
        "sim_partialfix": {
            "compile": "ok",
            "categories": {},
            "test": "fail",
            "suggestion": None,
            "verdict": "PartialFix",
        },
    }
    return case


# --- case 6: deleted switch cases unrelated to the task ----------------------------------

_ESCAPE_HEADER = """\
#ifndef ESCAPE_H
#define ESCAPE_H

#include <stddef.h>

size_t hex_value(char c);
size_t str_span(const char *str);
void str_copy(char *dst, const char *src, size_t n);
void escape_buffer_reserve(size_t n);
void unescape_string(char *str);

#endif
"""

_ESCAPE_PROLOGUE = """\
/* In-place unescaping for a small pattern language. */
#include <stddef.h>
#include "escape.h"

size_t hex_value(char c)
{
    if (c >= '0' && c <= '9')
        return (size_t)(c - '0');
    if (c >= 'a' && c <= 'f')
        return (size_t)(c - 'a' + 10);
    return 16;
}

size_t str_span(const char *str)
{
    size_t n = 0;

    while (str[n] != '\\0')
        n++;
    return n;
}

void str_copy(char *dst, const char *src, size_t n)
{
    size_t i;

    for (i = 0; i < n; i++)
        dst[i] = src[i];
    dst[n] = '\\0';
}

void escape_buffer_reserve(size_t n)
{
    /* Kept for ABI compatibility; callers manage growth directly. */
    (void)n;
}

"""

_ESCAPE_PRE_FN = """\
void unescape_string(char *str)
{
    size_t i = 0, j = 0;

    while (str[i] != '\\0') {
        if (str[i] != '\\\\') {
            str[j++] = str[i++];
            continue;
        }
        i++;
        if (str[i] == '\\0')
            break;
        switch (str[i]) {
        case 'n': str[j++] = '\\x0a'; break;
        case 'r': str[j++] = '\\x0d'; break;
        case 't': str[j++] = '\\x09'; break;
        case 'v': str[j++] = '\\x0b'; break;
        case 'x': str[j++] = '\\\\'; str[j++] = 'x'; break;
        case 'u': str[j++] = '\\\\'; str[j++] = 'u'; break;
        case '\\n': break;
        case '\\r':
            if (str[i + 1] == '\\n')
                i++;
            break;
        default: str[j++] = '\\\\'; str[j++] = str[i];
        }
        i++;
    }
    str[j] = '\\0';
}
"""

_ESCAPE_HUMAN_FN = _ESCAPE_PRE_FN.replace(
    "        case 'v': str[j++] = '\\x0b'; break;\n",
    "        case 'v': str[j++] = '\\x0b'; break;\n"
    "        case '\\\\': str[j++] = '\\\\'; break;\n",
)

_ESCAPE_TEST = """\
#include "escape.h"

static int mismatch(const char *input, const char *expected)
{
    char buf[64];
    const char *a = buf;
    const char *b = expected;

    str_copy(buf, input, str_span(input));
    unescape_string(buf);
    while (*a && *b && *a == *b) {
        a++;
        b++;
    }
    return *a != *b;
}

int main(void)
{
    if (mismatch("plain", "plain")) return 1;
    if (mismatch("a\\\\nb", "a\\nb")) return 2;
    if (mismatch("a\\\\\\\\b", "a\\\\b")) return 3;
    if (mismatch("a\\\\\\nb", "ab")) return 4;
    if (mismatch("a\\\\\\r\\nb", "ab")) return 5;
    if (mismatch("a\\\\ub", "a\\\\ub")) return 6;
    return 0;
}
"""


def _escape_deleted_file(post_source: str) -> str:
    """The human fix applied, but the 'u'/newline cases and a helper dropped."""
    text = post_source
    text = text.replace("        case 'u': str[j++] = '\\\\'; str[j++] = 'u'; break;\n", "")
    text = text.replace("        case '\\n': break;\n", "")
    text = text.replace(
        "        case '\\r':\n            if (str[i + 1] == '\\n')\n                i++;\n            break;\n",
        "",
    )
    text = text.replace(
        "void escape_buffer_reserve(size_t n)\n"
        "{\n"
        "    /* Kept for ABI compatibility; callers manage growth directly. */\n"
        "    (void)n;\n"
        "}\n\n",
        "",
    )
    return text


def _case_escape() -> FixtureCase:
    case = FixtureCase(
        name="escape",
        source_file="escape.c",
        header_file="escape.h",
        test_file="test_escape.c",
        function_name="unescape_string",
        message="Support escaped backslash for both string matching and character class matching",
        pre_date="2024-09-01",
        fix_date="2024-09-15",
        header=_ESCAPE_HEADER,
        prologue=_ESCAPE_PROLOGUE,
        pre_fn=_ESCAPE_PRE_FN,
        human_fn=_ESCAPE_HUMAN_FN,
        epilogue="",
        test_source=_ESCAPE_TEST,
    )
    case.responses = {
        "sim_correct": _fenced(case.human_fn),
        "sim_deletion": _fenced(
            _escape_deleted_file(case.post_source),
            "Here is the complete updated file with escaped backslash support:",
        ),
    }
    case.expectations = {
        "sim_correct": dict(ROW_CORRECT),
        "sim_deletion": {
            "compile": "ok",
            "categories": {},
            "test": "fail",
            "suggestion": "DeletedUnrelatedCode",
            "verdict": "DeletedUnrelatedCode",
        },
    }
    return case


# --- case 7: integer-overflow guard before allocation -------------------------------------

_STRUTIL_HEADER = """\
#ifndef STRUTIL_H
#define STRUTIL_H

#include <stddef.h>

void *mem_alloc(size_t size);
char *string_copy_n(const char *str, size_t len);

#endif
"""

_STRUTIL_PROLOGUE = """\
/* Allocation helpers for counted string copies. */
#include <stdlib.h>
#include <string.h>
#include "strutil.h"

void *mem_alloc(size_t size)
{
    return malloc(size);
}

"""

_STRUTIL_PRE_FN = """\
char *string_copy_n(const char *str, size_t len)
{
    char *new_str;

    new_str = mem_alloc(len + 1);
    if (!new_str)
        return NULL;
    memcpy(new_str, str, len);
    new_str[len] = '\\0';
    return new_str;
}
"""

_STRUTIL_HUMAN_FN = _STRUTIL_PRE_FN.replace(
    """    char *new_str;

    new_str = mem_alloc(len + 1);""",
    """    char *new_str;

    if (len == (size_t)-1)
        return NULL;
    new_str = mem_alloc(len + 1);""",
)

_STRUTIL_ALT_FN = _STRUTIL_PRE_FN.replace(
    """    char *new_str;

    new_str = mem_alloc(len + 1);""",
    """    char *new_str;

    if (len + 1 == 0)
        return NULL;
    new_str = mem_alloc(len + 1);""",
)

_STRUTIL_TEST = """\
#include <stdlib.h>
#include <string.h>
#include "strutil.h"

int main(void)
{
    char *copy = string_copy_n("hello", 3);

    if (!copy || strcmp(copy, "hel") != 0) return 1;
    free(copy);
    if (string_copy_n("x", (size_t)-1) != NULL) return 2;
    return 0;
}
"""


def _case_strutil() -> FixtureCase:
    case = FixtureCase(
        name="strutil",
        source_file="strutil.c",
        header_file="strutil.h",
        test_file="test_strutil.c",
        function_name="string_copy_n",
        message="Check for integer overflow before the copied string is allocated",
        pre_date="2024-12-20",
        fix_date="2025-01-10",
        header=_STRUTIL_HEADER,
        prologue=_STRUTIL_PROLOGUE,
        pre_fn=_STRUTIL_PRE_FN,
        human_fn=_STRUTIL_HUMAN_FN,
        epilogue="",
        test_source=_STRUTIL_TEST,
    )
    case.responses = {
        "sim_correct": _fenced(case.human_fn),
        "sim_altfix": _fenced(
            _STRUTIL_ALT_FN,
            "Guard against the length wrapping around before allocating:",
            "When len is the maximum size_t value, len + 1 wraps to zero.",
        ),
        "sim_partial": _fenced(_truncate(case.human_fn)),
    }
    case.expectations = {
        "sim_correct": dict(ROW_CORRECT),
        "sim_partial": dict(ROW_PARTIAL),
        "sim_altfix": {
            "compile": "ok",
            "categories": {},
            "test": "pass",
            "suggestion": None,
            "verdict": "DifferentAppearsCorrect",
        },
    }
    return case


ALL_CASES = [
    _case_deque,
    _case_jsonobj,
    _case_hashtab,
    _case_jsonsize,
    _case_reflist,
    _case_escape,
    _case_strutil,
]


# --- corpus materialization -------------------------------------------------------------


def _git(repo: Path, *args: str, date: str | None = None) -> str:
    env = dict(os.environ)
    env.update(GIT_ENV)
    if date:
        env["GIT_AUTHOR_DATE"] = f"{date}T12:00:00+00:00"
        env["GIT_COMMITTER_DATE"] = f"{date}T12:00:00+00:00"
    proc = subprocess.run(
        ["git", "-C", str(repo), *args], capture_output=True, text=True, env=env
    )
    if proc.returncode != 0:
        raise RuntimeError(f"git {' '.join(args)}: {proc.stderr}")
    return proc.stdout


def build_case_repo(case: FixtureCase, repo_dir: Path) -> str:
    """Two commits: scaffolding import, then the single-file human fix."""
    repo_dir.mkdir(parents=True, exist_ok=True)
    _git(repo_dir, "init", "-q", "-b", "main")
    (repo_dir / case.header_file).write_text(case.header)
    (repo_dir / case.source_file).write_text(case.pre_source)
    (repo_dir / case.test_file).write_text(case.test_source)
    _git(repo_dir, "add", "-A")
    _git(repo_dir, "commit", "-q", "-m", f"Import {case.name} scaffolding", date=case.pre_date)
    (repo_dir / case.source_file).write_text(case.post_source)
    _git(repo_dir, "add", "-A")
    _git(repo_dir, "commit", "-q", "-m", case.message, date=case.fix_date)
    return _git(repo_dir, "rev-parse", "HEAD").strip()


def build_fixture_corpus(out_dir: str | Path) -> dict:
    """Materialize repos, responses, campaign config and the manifest.

    Providers with no tailored response for a case replay that case's
    correct response, so every (task x provider) cell is populated and
    expected.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutDirNotWritable(f"cannot write to {out}: {exc}") from exc

    cases = [make() for make in ALL_CASES]
    manifest: dict = {"cases": [], "providers": PROVIDERS, "expectations": {}}

    for provider in PROVIDERS:
        (out / "responses" / provider).mkdir(parents=True, exist_ok=True)

    config_lines = [
        "[campaign]",
        "store = store",
        "workers = 2",
        "",
        "[criteria]",
        "max_patch_loc = 66",
        "min_message_tokens = 4",
        "",
    ]

    for case in cases:
        repo_dir = out / "repos" / case.name
        fix_sha = build_case_repo(case, repo_dir)
        task_id = f"{case.name}-{fix_sha[:10]}"
        kind = "feature-enhancement" if case.pre_fn == "" else "bug-fix"
        manifest["cases"].append(
            {
                "name": case.name,
                "task_id": task_id,
                "commit": fix_sha,
                "kind": kind,
                "function_name": case.function_name,
                "author_date": case.fix_date,
                "source_file": case.source_file,
            }
        )
        expectations: dict[str, dict] = {}
        for provider in PROVIDERS:
            text = case.responses.get(provider, case.responses["sim_correct"])
            (out / "responses" / provider / task_id).write_text(text)
            row = case.expectations.get(provider, case.expectations["sim_correct"])
            expectations[provider] = row
        manifest["expectations"][task_id] = expectations

        sources = f"{case.source_file} {case.test_file}"
        config_lines += [
            f"[project:{case.name}]",
            f"repo = repos/{case.name}",
            f"build = {CC_CMD.format(sources=sources)}",
            f"analyze = {case.source_file}",
            "test = ./test_prog",
            "test_timeout = 60",
            "",
        ]

    for provider in PROVIDERS:
        config_lines += [
            f"[provider:{provider}]",
            f"endpoint = responses/{provider}",
            "model = replay",
            "",
        ]

    (out / "campaign.ini").write_text("\n".join(config_lines))
    manifest["campaign_config"] = "campaign.ini"
    (out / "corpus_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest
