"""Sanity check for the training loop: memorise 8 random images."""

import argparse
import time

import numpy as np

from biasaudit.nn import NetConfig, TrainConfig, init_model, loss_and_gradients, normalize, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--lr", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    x = normalize(rng.integers(0, 256, (8, 48, 48)).astype(np.uint8))
    y = np.array([0, 1, 2, 3, 4, 5, 0, 1])
    model = init_model(NetConfig(), args.seed)
    t = time.perf_counter()

    def report(epoch, loss):
        if (epoch + 1) % 25 == 0:
            print(f"step {epoch + 1:4d}  batch loss {loss:.4f}")

    train(model, x, y, TrainConfig(learning_rate=args.lr, epochs=args.steps, batch_size=8, seed=args.seed),
          progress=report)
    loss, _ = loss_and_gradients(model, x, y)
    print(f"eval-mode loss {loss:.6f} after {args.steps} steps ({time.perf_counter() - t:.1f}s)")


if __name__ == "__main__":
    main()
