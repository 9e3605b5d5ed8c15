"""Character-LM sanity run: memorize one sentence, watch perplexity fall to 1.

Usage: python3 scripts/lm_memorize.py [--epochs 100]
"""

import argparse

import numpy as np

from lmtagger.autodiff import zero_grads
from lmtagger.charlm import (
    CharBiLM,
    lm_loss_parts,
    perplexity,
    route_highway,
    run_char_level,
)
from lmtagger.corpus import LabeledSentence, build_char_stream, build_vocab
from lmtagger.layers import clip_gradients
from lmtagger.trainer import OptimizerState, learning_rate_at, sgd_step


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--copies", type=int, default=50)
    args = ap.parse_args()

    sent = LabeledSentence(("the", "cat", "sat", "on", "mat"), ("O",) * 5)
    wv, cv, _ = build_vocab([sent] * args.copies, min_freq=1)
    model = CharBiLM(len(cv), len(wv), char_dim=10, state_size=30,
                     rng=np.random.default_rng(1))
    stream = build_char_stream(sent, cv)
    targets = [wv.lookup(w) for w in sent.words]
    params = model.parameters()
    opt = OptimizerState(eta0=0.05)
    n = len(sent)

    def directions():
        f, r = run_char_level(model, stream)
        f_lm, _, r_lm, _ = route_highway(model, f, r)
        return lm_loss_parts(model, f_lm, r_lm, targets)

    for epoch in range(args.epochs):
        lr = learning_rate_at(opt, epoch)
        for lo in range(0, args.copies, 10):
            zero_grads(params)
            fwd, bwd = directions()
            # identical copies: the batch sum is a scalar multiple
            loss = (fwd + bwd) * float(min(10, args.copies - lo))
            loss.backward()
            clip_gradients(params, 5.0)
            sgd_step(opt, params, lr)
        opt.epoch += 1
        if epoch % 10 == 0 or epoch == args.epochs - 1:
            fwd, bwd = directions()
            print(f"epoch {epoch:3d}  fwd ppl {perplexity(fwd.item(), n):7.4f}  "
                  f"bwd ppl {perplexity(bwd.item(), n):7.4f}")


if __name__ == "__main__":
    main()
