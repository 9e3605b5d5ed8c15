"""Train on the synthetic corpus until it is memorized, printing both metrics.

Usage: python3 scripts/overfit_tiny.py [--epochs 200] [--state 50]
Expect token accuracy and span F1 to reach 1.0 in roughly 50-80 epochs.
"""

import argparse
import time

import numpy as np
from make_tiny_corpus import corpus_sentences

from lmtagger.autodiff import zero_grads
from lmtagger.corpus import LabeledSentence, build_vocab, decode_bioes
from lmtagger.layers import clip_gradients
from lmtagger.metrics import span_prf, token_accuracy
from lmtagger.model import LmLstmCrf, ModelConfig, batch_joint_loss
from lmtagger.trainer import OptimizerState, learning_rate_at, sgd_step


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=200)
    ap.add_argument("--state", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    sents = [LabeledSentence(w, l) for w, l in corpus_sentences()]
    wv, cv, lv = build_vocab(sents)
    cfg = ModelConfig(word_vocab_size=len(wv), char_vocab_size=len(cv),
                      num_labels=len(lv) - 1, char_state=args.state,
                      word_state=args.state)
    model = LmLstmCrf(cfg, wv, cv, lv, np.random.default_rng(args.seed))
    print(f"{model.parameter_count()['total']} parameters, "
          f"{len(wv)} word types, {len(lv) - 1} labels")

    params = model.parameters()
    opt = OptimizerState(eta0=0.01)
    rng = np.random.default_rng(args.seed)
    order = np.arange(len(sents))
    gold_labels = [list(s.labels) for s in sents]
    gold_spans = [decode_bioes(ls) for ls in gold_labels]

    t0 = time.time()
    for epoch in range(args.epochs):
        lr = learning_rate_at(opt, epoch)
        rng.shuffle(order)
        total = 0.0
        for lo in range(0, len(sents), 10):
            batch = [sents[i] for i in order[lo:lo + 10]]
            zero_grads(params)
            loss = batch_joint_loss(model, batch, mode="train", rng=rng)
            total += loss.item()
            loss.backward()
            clip_gradients(params, 5.0)
            sgd_step(opt, params, lr)
        opt.epoch += 1

        predicted = [model.predict_tags(s) for s in sents]
        acc = token_accuracy(gold_labels, predicted)
        f1 = span_prf(gold_spans, [decode_bioes(p) for p in predicted]).f1
        print(f"epoch {epoch:3d}  loss {total:9.3f}  acc {acc:.3f}  "
              f"f1 {f1:.3f}  {time.time() - t0:6.1f}s")
        if acc == 1.0 and f1 == 1.0:
            print("memorized")
            break


if __name__ == "__main__":
    main()
