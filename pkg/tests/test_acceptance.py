"""Release gate: nine checks, each printing one PASS/FAIL line.

Every check pins its own tolerance and (where stated) a wall-clock budget.
The tenth check needs licensed corpora and a half-day CPU budget, so it is
recorded as a skip rather than silently dropped.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from synthetic import cyclic_lm_corpus, tiny_ner_corpus

from lmtagger.autodiff import Tensor, zero_grads
from lmtagger.charlm import CharBiLM, lm_loss_parts, perplexity, route_highway, run_char_level
from lmtagger.cli import main
from lmtagger.corpus import (
    START_LABEL,
    LabeledSentence,
    Span,
    Vocabulary,
    build_char_stream,
    build_vocab,
    decode_bioes,
    render_bioes,
)
from lmtagger.crf import CrfLayer, brute_force_oracle, log_partition, viterbi_decode
from lmtagger.checkpoint import checkpoint_load, checkpoint_save
from lmtagger.layers import clip_gradients, grad_check
from lmtagger.metrics import span_prf, token_accuracy
from lmtagger.model import LmLstmCrf, ModelConfig, batch_joint_loss
from lmtagger.trainer import OptimizerState, learning_rate_at, sgd_step


@contextmanager
def criterion(num: int, title: str):
    try:
        yield
    except BaseException:
        print(f"[criterion {num:2d}] FAIL  {title}")
        raise
    print(f"[criterion {num:2d}] PASS  {title}")


def random_crf_instance(rng):
    n = int(rng.integers(1, 7))
    num_labels = int(rng.integers(1, 6))
    feat = int(rng.integers(1, 5))
    crf = CrfLayer(num_labels, feat, rng)
    crf.w.data[...] = rng.standard_normal(crf.w.shape)
    crf.b.data[...] = rng.standard_normal(crf.b.shape)
    zs = [Tensor(rng.standard_normal(feat)) for _ in range(n)]
    return crf, zs


def test_criterion_1_crf_matches_enumeration():
    with criterion(1, "log-partition and Viterbi agree with enumeration, 1000 cases"):
        rng = np.random.default_rng(42)
        t0 = time.time()
        for _ in range(1000):
            crf, zs = random_crf_instance(rng)
            log_z, best_seq, _ = brute_force_oracle(crf, zs)
            assert abs(log_partition(crf, zs).item() - log_z) <= 1e-8
            labels, _ = viterbi_decode(crf, zs)
            assert labels == best_seq
        assert time.time() - t0 < 30.0


def test_criterion_2_joint_loss_gradients():
    with criterion(2, "joint-loss gradients match central differences, 20 sentences"):
        words = ["ada", "bo", "cy", "dee", "eli", "fay", "gus", "haj", "ivo",
                 "jay", "kit", "lou", "mia", "ned", "oz", "pia", "quin", "rex"]
        label_vocab = Vocabulary(
            ["O", "S-PER", "S-LOC", "B-PER", "E-PER", START_LABEL])
        t0 = time.time()
        worst = 0.0
        for k in range(20):
            srng = np.random.default_rng(1000 + k)
            sent = LabeledSentence(tuple(srng.choice(words, size=2)),
                                   tuple(srng.choice(["O", "S-PER", "S-LOC"], size=2)))
            wv, cv, _ = build_vocab([sent], min_freq=1)
            cfg = ModelConfig(word_vocab_size=len(wv), char_vocab_size=len(cv),
                              num_labels=len(label_vocab) - 1, char_emb_dim=2,
                              char_state=3, word_emb_dim=3, word_state=4,
                              lm_weight=1.0, dropout=0.0)
            model = LmLstmCrf(cfg, wv, cv, label_vocab, np.random.default_rng(k))
            report = grad_check(lambda: model.joint_loss(sent, mode="eval"),
                                model.parameters(), h=1e-5, tol=1e-4,
                                samples_per_param=6, seed=k)
            worst = max(worst, report.max_rel_err)
            assert report.passed, report.worst
        assert worst < 1e-4
        assert time.time() - t0 < 60.0


def test_criterion_3_overfits_tiny_corpus():
    with criterion(3, "tiny-corpus training reaches accuracy 1.0 and F1 1.0"):
        sents = tiny_ner_corpus()
        assert len(sents) == 20
        vocab_size = len({w for s in sents for w in s.words})
        assert 25 <= vocab_size <= 35
        assert {s.label for x in sents for s in decode_bioes(list(x.labels))} == \
            {"PER", "LOC"}

        wv, cv, lv = build_vocab(sents)  # default frequency cutoff applies
        cfg = ModelConfig(word_vocab_size=len(wv), char_vocab_size=len(cv),
                          num_labels=len(lv) - 1, char_state=50, word_state=50)
        model = LmLstmCrf(cfg, wv, cv, lv, np.random.default_rng(0))
        params = model.parameters()
        opt = OptimizerState(eta0=0.01)
        rng = np.random.default_rng(0)
        order = np.arange(len(sents))
        gold_labels = [list(s.labels) for s in sents]
        gold_spans = [decode_bioes(ls) for ls in gold_labels]

        t0 = time.time()
        converged_at = None
        for epoch in range(200):
            lr = learning_rate_at(opt, epoch)
            rng.shuffle(order)
            for lo in range(0, len(sents), 10):
                batch = [sents[i] for i in order[lo:lo + 10]]
                zero_grads(params)
                loss = batch_joint_loss(model, batch, mode="train", rng=rng)
                loss.backward()
                clip_gradients(params, 5.0)
                sgd_step(opt, params, lr)
            opt.epoch += 1
            predicted = [model.predict_tags(s) for s in sents]
            acc = token_accuracy(gold_labels, predicted)
            f1 = span_prf(gold_spans, [decode_bioes(p) for p in predicted]).f1
            if acc == 1.0 and f1 == 1.0:
                converged_at = epoch
                break
        elapsed = time.time() - t0
        assert converged_at is not None, "no convergence within 200 epochs"
        assert elapsed < 300.0


def test_criterion_4_lm_memorizes_cyclic_corpus():
    with criterion(4, "LM-only training reaches perplexity <= 1.2 per direction"):
        corpus = cyclic_lm_corpus(50)
        sent = corpus[0]
        wv, cv, _ = build_vocab(corpus, min_freq=1)
        model = CharBiLM(len(cv), len(wv), char_dim=10, state_size=30,
                         rng=np.random.default_rng(1))
        stream = build_char_stream(sent, cv)
        targets = [wv.lookup(w) for w in sent.words]
        params = model.parameters()
        opt = OptimizerState(eta0=0.05)

        def batch_loss(size):
            # all sentences in the batch are the same object, so the batch
            # sum collapses to a scalar multiple of one sentence's loss
            f, r = run_char_level(model, stream)
            f_lm, _, r_lm, _ = route_highway(model, f, r)
            fwd, bwd = lm_loss_parts(model, f_lm, r_lm, targets)
            return (fwd + bwd) * float(size)

        for epoch in range(100):
            lr = learning_rate_at(opt, epoch)
            for lo in range(0, len(corpus), 10):
                zero_grads(params)
                loss = batch_loss(min(10, len(corpus) - lo))
                loss.backward()
                clip_gradients(params, 5.0)
                sgd_step(opt, params, lr)
            opt.epoch += 1

        f, r = run_char_level(model, stream)
        f_lm, _, r_lm, _ = route_highway(model, f, r)
        fwd, bwd = lm_loss_parts(model, f_lm, r_lm, targets)
        n = len(sent)
        assert perplexity(fwd.item(), n) <= 1.2
        assert perplexity(bwd.item(), n) <= 1.2

        # untrained heads zeroed out: both directions go exactly uniform
        fresh = CharBiLM(len(cv), len(wv), char_dim=10, state_size=30,
                         rng=np.random.default_rng(2))
        for head in fresh.lm_head_parameters():
            head.data[...] = 0.0
        f, r = run_char_level(fresh, stream)
        f_lm, _, r_lm, _ = route_highway(fresh, f, r)
        fwd, bwd = lm_loss_parts(fresh, f_lm, r_lm, targets)
        expected = 2.0 * n * np.log(len(wv))
        assert abs((fwd + bwd).item() - expected) <= 1e-10


def test_criterion_5_ablations_are_faithful():
    with criterion(5, "co-training off keeps LM heads frozen; highway off drops "
                      "exactly the highway parameters"):
        sents = tiny_ner_corpus()[:6]
        wv, cv, lv = build_vocab(sents, min_freq=1)
        cfg = ModelConfig(word_vocab_size=len(wv), char_vocab_size=len(cv),
                          num_labels=len(lv) - 1, char_emb_dim=3, char_state=4,
                          word_emb_dim=4, word_state=4, enable_lm=False)
        model = LmLstmCrf(cfg, wv, cv, lv, np.random.default_rng(0))
        params = model.parameters()
        heads = model.charlm.lm_head_parameters()
        assert heads, "ablated model must still allocate its LM heads"
        opt = OptimizerState(eta0=0.01)
        rng = np.random.default_rng(0)
        for lo in range(0, len(sents), 2):
            zero_grads(params)
            loss = batch_joint_loss(model, sents[lo:lo + 2], mode="train", rng=rng)
            loss.backward()
            for head in heads:
                assert np.all(head.grad == 0.0)
            clip_gradients(params, 5.0)
            sgd_step(opt, params, lr=0.01)

        # parameter-count delta at published sizes, recomputed from shapes
        base = dict(word_vocab_size=len(wv), char_vocab_size=len(cv),
                    num_labels=len(lv) - 1)
        full = LmLstmCrf(ModelConfig(**base), wv, cv, lv, np.random.default_rng(0))
        bare = LmLstmCrf(ModelConfig(**base, enable_highway=False), wv, cv, lv,
                         np.random.default_rng(0))
        h = full.config.char_state
        expected = 4 * (2 * (h * h + h))
        assert expected == 722_400
        measured = sum(p.size for u in full.charlm.highway_units()
                       for p in u.parameters())
        assert measured == expected
        assert full.parameter_count()["total"] - bare.parameter_count()["total"] \
            == expected
        assert not bare.charlm.highway_units()


def test_criterion_6_bioes_round_trip_and_totality():
    with criterion(6, "10k span layouts round-trip; 10k arbitrary label "
                      "sequences decode"):
        rng = np.random.default_rng(99)
        types = ["PER", "LOC", "ORG", "MISC"]
        for _ in range(10_000):
            n = int(rng.integers(1, 13))
            spans, pos = [], 0
            while pos < n:
                if rng.random() < 0.5:
                    width = int(rng.integers(1, 4))
                    end = min(pos + width - 1, n - 1)
                    spans.append(Span(str(rng.choice(types)), pos, end))
                    pos = end + 1
                else:
                    pos += 1
            labels = render_bioes(spans, n)
            assert decode_bioes(labels) == spans

        pool = ["O", "B-PER", "I-PER", "E-PER", "S-LOC", "B-LOC", "I-",
                "E-ORG", "S-", "banana", "", "X-Y-Z", "b-per", "I", "E",
                "S-PER", "O-O"]
        for _ in range(10_000):
            n = int(rng.integers(1, 13))
            labels = [pool[int(i)] for i in rng.integers(0, len(pool), size=n)]
            spans = decode_bioes(labels)  # must be total
            for sp in spans:
                assert 0 <= sp.start <= sp.end < n


def test_criterion_7_schedule_and_momentum():
    with criterion(7, "decay schedule exact to t=1e6; zero momentum equals "
                      "plain SGD bitwise"):
        opt = OptimizerState(eta0=0.015, decay=0.05)
        ts = np.arange(0, 10 ** 6 + 1)
        expected = 0.015 / (1.0 + 0.05 * ts)
        sample = np.concatenate([ts[:1000], ts[::997], ts[-1000:]])
        for t in sample:
            assert learning_rate_at(opt, int(t)) == expected[t]

        rng = np.random.default_rng(3)
        for _ in range(10):
            data = rng.standard_normal(17)
            grad = rng.standard_normal(17)
            from lmtagger.autodiff import Parameter
            p = Parameter(data.copy(), "p")
            p.grad[...] = grad
            sgd_step(OptimizerState(eta0=0.01, momentum=0.0), [p], 0.01)
            np.testing.assert_array_equal(p.data, data - 0.01 * grad)


def test_criterion_8_determinism_and_persistence(tmp_path):
    with criterion(8, "same seed gives identical history; checkpoints restore "
                      "weights and tags exactly"):
        corpus_text = "\n".join(
            "\n".join(f"{w} {l}" for w, l in zip(s.words, s.labels)) + "\n"
            for s in tiny_ner_corpus()[:8])

        def run(name):
            d = tmp_path / name
            d.mkdir()
            (d / "data.conll").write_text(corpus_text, encoding="utf-8")
            keys = dict(train_path=str(d / "data.conll"),
                        dev_path=str(d / "data.conll"),
                        checkpoint_out=str(d / "m.ckpt"),
                        history_out=str(d / "h.tsv"),
                        char_emb_dim=3, char_state=4, word_emb_dim=4,
                        word_state=4, min_freq=1, batch_size=4, max_epochs=3,
                        patience=50, metric="f1", seed=17)
            cfg = d / "run.cfg"
            cfg.write_text("\n".join(f"{k} = {v}" for k, v in keys.items()) + "\n",
                           encoding="utf-8")
            assert main(["train", "--config", str(cfg)]) == 0
            return d

        d1, d2 = run("one"), run("two")
        h1 = [l.split("\t") for l in (d1 / "h.tsv").read_text().splitlines()]
        h2 = [l.split("\t") for l in (d2 / "h.tsv").read_text().splitlines()]
        assert len(h1) == len(h2) == 3
        # every column except per-epoch wall-clock must match exactly
        assert [r[:4] for r in h1] == [r[:4] for r in h2]

        m1, o1 = checkpoint_load(str(d1 / "m.ckpt"))
        m2, _ = checkpoint_load(str(d2 / "m.ckpt"))
        for a, b in zip(m1.parameters(), m2.parameters()):
            np.testing.assert_array_equal(a.data, b.data)

        # round-trip through a fresh file
        again = tmp_path / "again.ckpt"
        checkpoint_save(str(again), m1, o1)
        m3, _ = checkpoint_load(str(again))
        for a, b in zip(m1.parameters(), m3.parameters()):
            np.testing.assert_array_equal(a.data, b.data)
        for s in tiny_ner_corpus()[:8]:
            assert m1.predict_tags(s) == m3.predict_tags(s) == m2.predict_tags(s)


def test_criterion_9_span_metric_properties():
    with criterion(9, "span P/R/F1 exact on the half-right case and sane on "
                      "1000 random pairs"):
        gold = [[Span("PER", 0, 1), Span("LOC", 3, 3)]]
        pred = [[Span("PER", 0, 1), Span("LOC", 4, 4)]]
        prf = span_prf(gold, pred)
        assert prf.precision == 0.5 and prf.recall == 0.5 and prf.f1 == 0.5

        rng = np.random.default_rng(7)
        types = ["PER", "LOC", "ORG"]

        def random_spanset():
            return [Span(str(rng.choice(types)), int(s), int(s) + int(rng.integers(0, 3)))
                    for s in rng.integers(0, 20, size=rng.integers(0, 6))]

        for _ in range(1000):
            g = [random_spanset() for _ in range(int(rng.integers(1, 4)))]
            p = [random_spanset() for _ in range(len(g))]
            prf = span_prf(g, p)
            tp = sum(len(set(a) & set(b)) for a, b in zip(g, p))
            n_pred = sum(len(set(b)) for b in p)
            n_gold = sum(len(set(a)) for a in g)
            assert prf.tp == tp
            assert 0.0 <= prf.precision <= 1.0 and 0.0 <= prf.recall <= 1.0
            assert prf.f1 <= max(prf.precision, prf.recall) + 1e-12
            assert (prf.f1 == 0.0) == (tp == 0)
            if n_pred:
                assert prf.precision == tp / n_pred
            if n_gold:
                assert prf.recall == tp / n_gold
            flipped = span_prf(p, g)
            assert flipped.precision == prf.recall and flipped.recall == prf.precision


@pytest.mark.skip(reason="stretch goal, not gating: needs the licensed "
                         "CoNLL-2003 corpus and a >=12h CPU training budget "
                         "(dev F1 > 88; full model beats the no-LM variant "
                         "over 3 seeds)")
def test_criterion_10_benchmark_ordering():
    raise NotImplementedError
