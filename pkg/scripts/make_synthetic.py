"""Write a synthetic raw corpus, matching word vectors and a label list for CLI runs."""

import argparse
from pathlib import Path

from crisisgraph.dataset import save_corpus
from crisisgraph.synthetic import SyntheticSpec, make_corpus, make_embeddings


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    ap.add_argument("outdir", type=Path, help="directory for corpus.jsonl, vectors.txt, labels.txt")
    ap.add_argument("--n-tweets", type=int, default=80, help="corpus size")
    ap.add_argument("--k", type=int, default=4, help="number of labels")
    ap.add_argument("--dim", type=int, default=16, help="word vector width")
    ap.add_argument("--seed", type=int, default=0, help="generator seed")
    args = ap.parse_args()
    spec = SyntheticSpec(n_tweets=args.n_tweets, k=args.k, cluster_size=10, second_label_prob=0.3,
                         filler_vocab=20, filler_per_tweet=2, seed=args.seed)
    corpus, vocab = make_corpus(spec)
    args.outdir.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, args.outdir / "corpus.jsonl")
    table = make_embeddings(spec, dim=args.dim)
    with open(args.outdir / "vectors.txt", "w", encoding="utf-8") as fh:
        for tok in sorted(table.vectors):
            fh.write(tok + " " + " ".join(repr(float(x)) for x in table.vectors[tok]) + "\n")
    (args.outdir / "labels.txt").write_text(",".join(vocab.labels) + "\n", encoding="utf-8")
    print(f"{len(corpus)} tweets, {vocab.k} labels, {len(table.vectors)} vectors -> {args.outdir}")


if __name__ == "__main__":
    main()
