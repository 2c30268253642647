"""Acceptance suite: one test per criterion, each printing a PASS line with
its elapsed time (run with -s to see them).  Tolerances are pinned here, not
calibrated elsewhere."""

import itertools
import math
import time

import numpy as np
import pytest

from nag.astio import leaf, node, parse_ast, serialize_ast
from nag.attrs import VarId
from nag.checks import aggregate_reports, run_checks
from nag.corpus import (
    ClassRecord,
    SynthSpec,
    extract_examples,
    forced_replay,
    split_corpus,
    synth_corpus,
    vocabulary_for,
)
from nag.evidence import EVIDENCE_KINDS, EncoderParams, posterior
from nag.features import encode_context
from nag.generator import GenConfig, beam_search, generate, greedy
from nag.grammar import check_l_attributed, java_subset_grammar
from nag.models import (
    LatentModel,
    latent_gradients,
    latent_objective,
    load_count_model,
    next_token_eval,
    prepare_examples,
    save_count_model,
    train_count,
)
from nag.rng import Xoshiro256StarStar
from nag.semantics import annotate
from nag.fidelity import fidelity_report, jaccard
from conftest import formal, lit, local, writer_body, writer_context
from oracle_checks import oracle_sites
from tree_builders import random_tree, small_context

F0 = VarId("formal", 0)
F1 = VarId("formal", 1)
L0 = VarId("local", 0)


def _report(n, started, what):
    elapsed = time.time() - started
    print(f"\nACCEPTANCE {n}: PASS ({elapsed:.2f}s) {what}")
    return elapsed


@pytest.fixture(scope="module")
def trained():
    records = synth_corpus(SynthSpec(n_classes=1200, seed=21))
    vocab = vocabulary_for(records[0].ctx)
    train, held = split_corpus(records)
    model = train_count(
        [e for r in train for e in extract_examples(r, 0, vocab)], vocab)
    return model, held


def test_acceptance_1_worked_example():
    started = time.time()
    ctx = writer_context()
    annotated = annotate(writer_body(), ctx)
    first = next(n for _, n in annotated.walk() if n.rule_id == "a4")
    assert dict(first.syn.symtab) == {
        F0: "File", F1: "String", L0: "FileWriter"}
    assert annotated.valid
    elapsed = _report(1, started, "worked-example symbol table after the "
                                  "first statement is exact")
    assert elapsed < 1.0


def _adversarial_cases():
    """Twenty hand-written trees over the small test context."""
    ctx = small_context()

    def call(api, *args, recv=None, target=None):
        arglist = node("b6b")
        for a in reversed(args):
            arglist = node("b6a", a, arglist)
        return node("a5", node("b3", target or lit(), recv or lit(),
                               node("b5", leaf("Api", api), arglist),
                               node("b4b")))

    def seq(*stmts):
        out = stmts[-1]
        for s in reversed(stmts[:-1]):
            out = node("a2a", s, out)
        return out

    def decl(t, v):
        return node("a3", node("b1", leaf("Type", t), v))

    def objinit(t0, v, t1, *args):
        arglist = node("b6b")
        for a in reversed(args):
            arglist = node("b6a", a, arglist)
        return node("a4", node("b2", leaf("Type", t0), v, leaf("Type", t1),
                               arglist))

    def ret(v):
        return node("a6", node("b7", v))

    cond = lambda api: node("c6", node("b5", leaf("Api", api), node("b6b")))
    cases = [
        # undeclared receiver; uninitialized use; wrong argument type
        node("a1", call("write", recv=local(3))),
        node("a1", seq(decl("FileWriter", local(0)),
                       call("write", formal(1), recv=local(0)))),
        node("a1", call("write", formal(0), recv=local(0))),
        # wrong assignment type at the call site
        node("a1", seq(decl("int", local(1)),
                       call("readLine", recv=local(2), target=local(1)))),
        # no return statement; unused variable
        node("a1", node("a2b")),
        node("a1", seq(decl("String", local(4)), ret(lit()))),
        # extra argument; missing argument
        node("a1", call("flush", formal(1), recv=local(0))),
        node("a1", call("write", recv=local(0))),
        # internal call through the literal receiver (fine)
        node("a1", seq(call("helper"), ret(lit()))),
        # chained call on an incompatible intermediate type
        node("a1", node("a5", node(
            "b3", lit(), formal(0),
            node("b5", leaf("Api", "length"), node("b6b")),
            node("b4a", node("b5", leaf("Api", "flush"), node("b6b")),
                 node("b4b"))))),
        # catch binding shadows the block's variable (fine)
        node("a1", seq(node("c1.c", node(
            "c4",
            objinit("FileWriter", local(0), "FileWriter", formal(0)),
            node("c5a", leaf("Type", "IOException"), local(0),
                 call("printStackTrace", recv=local(0)), node("c5b")))),
            ret(lit()))),
        # loop body initialization does not survive the loop
        node("a1", seq(decl("FileWriter", local(5)),
                       node("c1.b", node("c3", cond("hasNext"),
                                         call("flush", recv=local(5), target=local(5)))),
                       call("write", formal(1), recv=local(5)))),
        # one-armed initialization does not survive the branch
        node("a1", seq(decl("FileWriter", local(6)),
                       node("c1.a", node("c2", cond("hasNext"),
                                         call("flush", recv=local(6), target=local(6)),
                                         node("a2b"))),
                       call("write", formal(1), recv=local(6)))),
        # every variable slot filled by the literal placeholder (fine)
        node("a1", call("write", lit())),
        # returning a value from a void method
        node("a1", ret(formal(0))),
        # redeclaration changes the visible type
        node("a1", seq(objinit("FileWriter", local(7), "FileWriter", formal(0)),
                       decl("Reader", local(7)),
                       call("write", formal(1), recv=local(7)))),
        # out-of-context field and formal accesses
        node("a1", call("write", recv=leaf("Var", VarId("field", 7)))),
        node("a1", call("write", recv=leaf("Var", VarId("formal", 8)))),
        # iterator protocol through a loop (fine)
        node("a1", seq(objinit("Reader", local(8), "Reader", formal(0), formal(1)),
                       node("c1.b", node("c3", cond("hasNext"),
                                         call("next", recv=local(8)))),
                       ret(lit()))),
        # the empty statement resets scope before a use
        node("a1", seq(node("a2b"), call("write", formal(1), recv=formal(0)))),
    ]
    return ctx, cases


def test_acceptance_2_checker_matches_oracle():
    started = time.time()
    ctx = small_context()
    rng = Xoshiro256StarStar(20)
    compared = 0
    for _ in range(220):
        ast = random_tree(rng, ctx, max_nodes=40)
        assert sum(1 for _ in ast.walk()) <= 40
        assert run_checks(ast, ctx).site_keys() == oracle_sites(ast, ctx)
        compared += 1
    actx, cases = _adversarial_cases()
    assert len(cases) == 20
    for ast in cases:
        assert run_checks(ast, actx).site_keys() == oracle_sites(ast, actx)
        compared += 1
    elapsed = _report(2, started, f"checker agrees with the brute-force "
                                  f"oracle on {compared} trees, site by site")
    assert elapsed < 10.0


def test_acceptance_3_masked_generation_soundness(trained):
    started = time.time()
    model, held = trained
    g = java_subset_grammar()
    reports = []
    for i, record in enumerate(held[:100]):
        cfg = GenConfig(seed=3000 + i, beam_width=1, mask_mode="hard",
                        z_mode="posteriorMean")
        top = beam_search(g, model, record.ctx, record.evidence, cfg)[0][0]
        reports.append(run_checks(top.strip(), record.ctx))
    assert len(reports) == 100
    agg = aggregate_reports(reports)
    for check in ("undeclaredVarAccess", "actualParamType", "returnStmtType"):
        assert agg.means[check] == 1.0, check
    elapsed = _report(3, started, "100 masked width-1 generations score "
                                  "100.0% on the three masked checks")
    assert elapsed < 30.0


def test_acceptance_4_attribute_conditioning_gap():
    started = time.time()
    records = synth_corpus(SynthSpec(n_classes=5000, seed=11))
    assert sum(len(r.bodies) for r in records) >= 5000
    vocab = vocabulary_for(records[0].ctx)
    train, held = split_corpus(records)
    train_ex = [e for r in train for e in extract_examples(r, 0, vocab)]
    held_ex = [e for r in held for e in extract_examples(r, 0, vocab)]
    nag = next_token_eval(train_count(train_ex, vocab), held_ex)
    cng = next_token_eval(train_count(train_ex, vocab, attribute_blind=True),
                          held_ex)
    chance = 1.0 / len(vocab.alternatives("Var"))
    nag_acc = nag["variableAccess"]["accuracy"]
    cng_acc = cng["variableAccess"]["accuracy"]
    assert nag_acc >= 0.95, nag_acc
    assert cng_acc <= chance + 0.10, (cng_acc, chance)
    elapsed = _report(4, started, f"attribute-conditioned {100*nag_acc:.2f}% "
                                  f"vs blind {100*cng_acc:.2f}% on held-out "
                                  f"variable accesses")
    assert elapsed < 300.0


def test_acceptance_5_posterior_exactness():
    started = time.time()
    rng = Xoshiro256StarStar(55)
    for trial in range(1000):
        dim = 1 + rng.randrange(16)
        sigma2 = np.array([0.25 + 2.0 * rng.random()
                           for _ in EVIDENCE_KINDS])
        p = EncoderParams(dim=dim, sigma2=sigma2)
        n_items = rng.randrange(6)
        encoded = [(rng.randrange(len(EVIDENCE_KINDS)),
                    np.array(rng.normals(dim))) for _ in range(n_items)]
        post = posterior(encoded, p)
        inv = 1.0 / sigma2
        denom = 1.0 + sum(inv[j] for j, _ in encoded)
        mean = sum((inv[j] * v for j, v in encoded), np.zeros(dim)) / denom
        assert np.all(np.abs(post.mean - mean) < 1e-9)
        assert abs(post.variance - 1.0 / denom) < 1e-9
    # no evidence: the prior
    prior = posterior([], EncoderParams(dim=8))
    assert np.all(prior.mean == 0.0) and prior.variance == 1.0
    # variance strictly decreasing in item count
    p = EncoderParams(dim=4)
    last = 1.0
    items = []
    for j in range(12):
        items.append((j % len(EVIDENCE_KINDS), np.ones(4)))
        v = posterior(items, p).variance
        assert v < last
        last = v
    elapsed = _report(5, started, "posterior matches the closed form on "
                                  "1000 random configurations at 1e-9")
    assert elapsed < 1.0


def test_acceptance_6_latent_gradient_check():
    started = time.time()
    records = synth_corpus(SynthSpec(n_classes=4, seed=2))
    vocab = vocabulary_for(records[0].ctx)
    examples = [e for r in records for e in extract_examples(r, 0, vocab)]
    batch = [e for e in examples if e.symbol in ("Stmt", "Var", "Type")][:5]
    assert len(batch) == 5
    enc = EncoderParams(dim=6)
    model = LatentModel(vocab, enc)  # the parameter vector starts at zero
    prep = prepare_examples(batch, vocab, enc)
    rng = Xoshiro256StarStar(66)
    noise = {(gidx, s): np.array(rng.normals(6))
             for gidx in range(len(prep.groups)) for s in range(1)}
    _, gW, _, _ = latent_gradients(model, prep, noise)
    eps = 1e-6
    worst = 0.0
    for sym in ("Stmt", "Var", "Type"):
        W = model.weights[sym]
        probes = [(0, 0), (W.shape[0] - 1, 7), (1, W.shape[1] - 1),
                  (0, W.shape[1] - 3)]
        for ij in probes:
            orig = W[ij]
            W[ij] = orig + eps
            up = latent_objective(model, prep, noise)
            W[ij] = orig - eps
            down = latent_objective(model, prep, noise)
            W[ij] = orig
            fd = (up - down) / (2 * eps)
            a = gW[sym][ij]
            worst = max(worst, abs(a - fd) / max(abs(a), abs(fd), 1e-8))
    assert worst < 1e-4, worst
    elapsed = _report(6, started, f"analytic gradient matches central "
                                  f"differences (worst {worst:.2e})")
    assert elapsed < 10.0


def test_acceptance_7_round_trips(tmp_path):
    started = time.time()
    ctx = small_context()
    vocab = vocabulary_for(ctx)
    rng = Xoshiro256StarStar(70)
    from nag.evidence import evidence
    ev = evidence(methodNameKeywords=[("roundtrip",)])
    for _ in range(100):
        ast = random_tree(rng, ctx)
        # (a) extraction plus forced replay reconstructs the tree
        record = ClassRecord("c", ctx, ev, (ast,))
        examples = extract_examples(record, 0, vocab)
        assert forced_replay(examples, ctx, vocab) == ast
        # (b) serialize/parse identity
        assert parse_ast(serialize_ast(ast)) == ast
    # (c) trained model save/load is prediction-identical
    records = synth_corpus(SynthSpec(n_classes=60, seed=9))
    svocab = vocabulary_for(records[0].ctx)
    examples = [e for r in records for e in extract_examples(r, 0, svocab)]
    model = train_count(examples, svocab)
    path = tmp_path / "model.count"
    save_count_model(model, path)
    again = load_count_model(path)
    for ex in examples:
        assert again.predict(ex.symbol, ex.features) == \
            model.predict(ex.symbol, ex.features)
    elapsed = _report(7, started, "replay, text, and model round-trips are "
                                  "all exact")
    assert elapsed < 10.0


def test_acceptance_8_fidelity_properties():
    started = time.time()
    body = writer_body()
    report = fidelity_report([body], body)
    assert (report.api_call_set, report.api_call_sequences,
            report.program_paths, report.ast_exact_match) == (1, 1, 1, 1)
    # consistent local renaming changes nothing
    from nag.astio import AstNode

    def permute(n):
        if n.is_leaf:
            v = n.payload
            if isinstance(v, VarId) and v.kind == "local":
                return AstNode(symbol=n.symbol,
                               payload=VarId("local", (v.index + 3) % 10))
            return n
        return AstNode(symbol=n.symbol, rule_id=n.rule_id,
                       children=tuple(permute(c) for c in n.children))

    renamed = permute(body)
    r2 = fidelity_report([renamed], body)
    assert (r2.api_call_set, r2.api_call_sequences, r2.program_paths,
            r2.ast_exact_match) == (1, 1, 1, 1)
    assert jaccard({"A", "B"}, {"B", "C"}) == pytest.approx(1.0 / 3.0)
    empty = node("a1", node("a2b"))
    worse = fidelity_report([empty], body)
    better = fidelity_report([empty, renamed], body)
    assert better.api_call_set >= worse.api_call_set
    assert better.ast_exact_match == 1.0 >= worse.ast_exact_match
    elapsed = _report(8, started, "fidelity self-scores, renaming "
                                  "invariance, Jaccard value, and best-of-k "
                                  "monotonicity all hold")
    assert elapsed < 1.0


def test_acceptance_9_grammar_and_search_sanity(trained):
    started = time.time()
    assert check_l_attributed(java_subset_grammar()) == []
    model, held = trained
    g = java_subset_grammar()
    for i, record in enumerate(held[:50]):
        cfg = GenConfig(seed=9000 + i, beam_width=1, z_mode="posteriorMean")
        top = beam_search(g, model, record.ctx, record.evidence, cfg)[0][0]
        ge = greedy(g, model, record.ctx, record.evidence, cfg)
        assert serialize_ast(top.strip()) == serialize_ast(ge.strip())
    record = held[0]
    for seed in (1, 2, 3):
        a = generate(g, model, record.ctx, record.evidence, GenConfig(seed=seed))
        b = generate(g, model, record.ctx, record.evidence, GenConfig(seed=seed))
        assert serialize_ast(a.strip()) == serialize_ast(b.strip())
    elapsed = _report(9, started, "built-in grammar single-pass legal; "
                                  "width-1 beam is greedy on 50 runs; "
                                  "generation deterministic per seed")
    assert elapsed < 30.0
