import itertools

import pytest

from nag.astio import AstNode, leaf, node
from nag.attrs import VarId
from nag.fidelity import (
    api_call_sequences,
    api_call_set,
    ast_exact_match,
    canonical_locals,
    fidelity_report,
    jaccard,
    program_paths,
)
from nag.rng import Xoshiro256StarStar
from conftest import formal, lit, local, writer_body
from tree_builders import random_tree, small_context


def _seq(*stmts):
    out = stmts[-1]
    for s in reversed(stmts[:-1]):
        out = node("a2a", s, out)
    return out


def _call_stmt(api, *args):
    arglist = node("b6b")
    for a in reversed(args):
        arglist = node("b6a", a, arglist)
    return node("a5", node("b3", lit(), lit(),
                           node("b5", leaf("Api", api), arglist), node("b4b")))


def test_writer_body_call_set(fig_body):
    assert api_call_set(fig_body) == {
        "FileWriter.<init>", "write", "printStackTrace", "println"}


def test_epsilon_body_has_no_calls():
    assert api_call_set(node("a1", node("a2b"))) == set()


def test_duplicate_calls_collapse():
    body = node("a1", _seq(_call_stmt("write"), _call_stmt("write")))
    assert api_call_set(body) == {"write"}


def test_straight_line_sequence():
    body = node("a1", _seq(_call_stmt("a"), _call_stmt("b")))
    assert api_call_sequences(body) == {("a", "b")}


def test_branch_contributes_both_arms():
    cond = node("c6", node("b5", leaf("Api", "c"), node("b6b")))
    branch = node("c1.a", node("c2", cond, _call_stmt("a"), _call_stmt("b")))
    body = node("a1", branch)
    assert api_call_sequences(body) == {("c", "a"), ("c", "b")}


def test_try_catch_sequences():
    block = node("c1.c", node("c4", _call_stmt("a"),
                              node("c5a", leaf("Type", "E"), local(0),
                                   _call_stmt("b"), node("c5b"))))
    assert api_call_sequences(node("a1", block)) == {("a",), ("a", "b")}


def test_loop_zero_and_one_iteration():
    cond = node("c6", node("b5", leaf("Api", "c"), node("b6b")))
    loop = node("c1.b", node("c3", cond, _call_stmt("a")))
    assert api_call_sequences(node("a1", loop)) == {("c",), ("c", "a")}


def test_program_paths_identical_for_identical_trees(fig_body):
    assert program_paths(fig_body) == program_paths(fig_body)


def test_program_paths_erase_local_indices():
    a = node("a1", node("a6", node("b7", local(0))))
    b = node("a1", node("a6", node("b7", local(7))))
    assert program_paths(a) == program_paths(b)


def test_program_paths_distinguish_structures():
    a = node("a1", node("a6", node("b7", local(0))))
    b = node("a1", node("a2b"))
    assert jaccard(program_paths(a), program_paths(b)) < 1.0


def test_jaccard_definition():
    assert jaccard({"A", "B"}, {"B", "C"}) == pytest.approx(1.0 / 3.0)
    assert jaccard(set(), set()) == 1.0


def test_self_comparison_is_all_ones(fig_body):
    report = fidelity_report([fig_body], fig_body)
    assert (report.api_call_set, report.api_call_sequences,
            report.program_paths, report.ast_exact_match) == (1, 1, 1, 1)


def test_best_of_k_monotone(fig_body):
    other = node("a1", node("a2b"))
    worse = fidelity_report([other], fig_body)
    better = fidelity_report([other, fig_body], fig_body)
    assert better.api_call_set >= worse.api_call_set
    assert better.api_call_sequences >= worse.api_call_sequences
    assert better.program_paths >= worse.program_paths
    assert better.ast_exact_match >= worse.ast_exact_match
    assert better.ast_exact_match == 1.0


def _permute_locals(ast, perm):
    def walk(n):
        if n.is_leaf:
            v = n.payload
            if isinstance(v, VarId) and v.kind == "local":
                return AstNode(symbol=n.symbol,
                               payload=VarId("local", perm.get(v.index, v.index)))
            return n
        return AstNode(symbol=n.symbol, rule_id=n.rule_id,
                       children=tuple(walk(c) for c in n.children))
    return walk(ast)


def test_metrics_invariant_under_local_renaming(fig_body):
    perm = {0: 5, 5: 0, 1: 2, 2: 1}
    renamed = _permute_locals(fig_body, perm)
    a = fidelity_report([renamed], fig_body)
    assert a.api_call_set == 1.0
    assert a.api_call_sequences == 1.0
    assert a.program_paths == 1.0
    assert a.ast_exact_match == 1.0


def test_exact_match_agrees_with_permutation_bruteforce():
    # brute-force oracle: two trees are a-renaming-equal iff some permutation
    # of the local indices used maps one onto the other
    ctx = small_context()
    rng = Xoshiro256StarStar(77)

    def local_indices(ast):
        return sorted({n.payload.index for _, n in ast.walk()
                       if n.is_leaf and isinstance(n.payload, VarId)
                       and n.payload.kind == "local"})

    def brute_force_equal(a, b):
        idx = sorted(set(local_indices(a)) | set(local_indices(b)))
        if len(idx) > 4:
            return None
        for perm in itertools.permutations(idx):
            mapping = dict(zip(idx, perm))
            if _permute_locals(a, mapping) == b:
                return True
        return False

    compared = 0
    for _ in range(60):
        a = random_tree(rng, ctx, max_nodes=18)
        b = _permute_locals(a, {0: 1, 1: 0, 2: 3, 3: 2}) if rng.random() < 0.5 \
            else random_tree(rng, ctx, max_nodes=18)
        expected = brute_force_equal(a, b)
        if expected is None:
            continue
        assert ast_exact_match(a, b) == expected
        compared += 1
    assert compared > 30


def test_fidelity_symmetry_for_single_candidates(fig_body):
    other = _permute_locals(writer_body(), {0: 3})
    ab = fidelity_report([other], fig_body)
    ba = fidelity_report([fig_body], other)
    assert ab.api_call_set == ba.api_call_set
    assert ab.api_call_sequences == ba.api_call_sequences
    assert ab.program_paths == ba.program_paths
    assert ab.ast_exact_match == ba.ast_exact_match


def test_empty_candidates_rejected(fig_body):
    with pytest.raises(ValueError):
        fidelity_report([], fig_body)
