"""Small shared builders for sequence-model tests."""

from seroprompt.cohort import CohortSpec, generate_cohort
from seroprompt.promptify import LabelPair, Vocabulary, fit_binning, serialize_prompt, tokenize

TINY_FEATURES = ["Age", "LYMPH%", "D-Dimer"]


def tiny_setup(n_patients=12, features=TINY_FEATURES, n_bins=4, seed=0, missing=0.2, **spec):
    cohort = generate_cohort(CohortSpec.from_dict({
        "n_patients": n_patients, "features": list(features), "missing_rate": missing,
        "rng_seed": seed, **spec,
    }))
    binning = fit_binning(cohort, n_bins)
    vocab = Vocabulary.build(cohort.schema, binning)
    return cohort, binning, vocab, examples_for(cohort, binning, vocab)


def examples_for(cohort, binning, vocab):
    out = []
    for s in cohort.samples:
        pair = LabelPair.unchecked("severe" if s.severity else "mild", "death" if s.outcome else "survive")
        out.append((tokenize(serialize_prompt(s, cohort.schema), binning, vocab, pair), pair))
    return out
