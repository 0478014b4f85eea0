"""Domain model for binary lottery choice experiments.

A dataset couples a battery of two-outcome lottery pairs with the recorded
choices of a panel of subjects over one or two sessions. Loading validates
everything up front; after construction a dataset is immutable and safe to
share across estimation workers.

CSV schemas (UTF-8, comma-separated, header required):

* pairs file: ``pair_id,vA1,pA1,vA2,vB1,pB1,vB2`` — the second probability of
  each lottery is implied (``1 - pA1``, ``1 - pB1``). Optional ``pA2,pB2``
  columns may be given explicitly and are then validated to sum to one.
* choices file: ``subject_id,pair_id,session,choice`` with ``session`` in
  {1, 2} and ``choice`` in {A, B}. At most one row per
  (subject, pair, session).

Probabilities are written with at most six fractional digits. Frequencies are
computed from integer counts and converted to floating point in a single
division, so they do not depend on summation order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

PROB_TOL = 1e-9

TIME1 = 1
TIME2 = 2
SESSIONS = (TIME1, TIME2)


class DataError(ValueError):
    """Raised for malformed input files or inconsistent datasets."""


class Kind(str, Enum):
    """Lottery-pair taxonomy by the signs of the four outcomes."""

    PURE_GAIN = "pure_gain"
    PURE_LOSS = "pure_loss"
    MIXED = "mixed"
    MIXED_ZERO = "mixed_zero"


@dataclass(frozen=True)
class Lottery:
    """Two-outcome lottery: ``outcome1`` with ``prob1``, else ``outcome2``."""

    outcome1: float
    prob1: float
    outcome2: float
    prob2: float

    def __post_init__(self):
        for v in (self.outcome1, self.outcome2):
            if not math.isfinite(v):
                raise DataError(f"lottery outcome must be finite, got {v}")
        for p in (self.prob1, self.prob2):
            if not (0.0 <= p <= 1.0):
                raise DataError(f"lottery probability must be in [0, 1], got {p}")
        if abs(self.prob1 + self.prob2 - 1.0) > PROB_TOL:
            raise DataError(
                f"lottery probabilities must sum to 1, got {self.prob1} + {self.prob2}"
            )

    @property
    def outcomes(self) -> tuple[float, float]:
        return (self.outcome1, self.outcome2)

    def expected_value(self) -> float:
        return self.outcome1 * self.prob1 + self.outcome2 * self.prob2

    def validate_outcome_bound(self, bound: float) -> None:
        if max(abs(self.outcome1), abs(self.outcome2)) > bound:
            raise DataError(
                f"outcome outside [-{bound}, {bound}]: {self.outcomes}"
            )


def classify_kind(lot_a: Lottery, lot_b: Lottery) -> Kind:
    """Classify a pair from outcome signs.

    Pure gain/loss requires all four outcomes strictly positive/negative.
    Mixed-zero is the "one gain and one loss and zero" pattern: each lottery
    has exactly one zero outcome and the two non-zero outcomes have opposite
    signs. Everything else, including other zero-bearing pairs, is mixed.
    """
    outcomes = (*lot_a.outcomes, *lot_b.outcomes)
    if all(v > 0 for v in outcomes):
        return Kind.PURE_GAIN
    if all(v < 0 for v in outcomes):
        return Kind.PURE_LOSS

    def zero_pattern(lot: Lottery):
        zeros = [v for v in lot.outcomes if v == 0]
        nonzeros = [v for v in lot.outcomes if v != 0]
        if len(zeros) == 1 and len(nonzeros) == 1:
            return nonzeros[0]
        return None

    nz_a = zero_pattern(lot_a)
    nz_b = zero_pattern(lot_b)
    if nz_a is not None and nz_b is not None and (nz_a > 0) != (nz_b > 0):
        return Kind.MIXED_ZERO
    return Kind.MIXED


@dataclass(frozen=True)
class LotteryPair:
    pair_id: str
    lot_a: Lottery
    lot_b: Lottery
    kind: Kind = None  # type: ignore[assignment]

    def __post_init__(self):
        derived = classify_kind(self.lot_a, self.lot_b)
        if self.kind is None:
            object.__setattr__(self, "kind", derived)
        elif self.kind != derived:
            raise DataError(
                f"pair {self.pair_id}: stored kind {self.kind} != derived {derived}"
            )


@dataclass(frozen=True)
class ChoiceObservation:
    subject_id: str
    pair_id: str
    session: int
    choice: str

    def __post_init__(self):
        if self.session not in SESSIONS:
            raise DataError(f"session must be 1 or 2, got {self.session}")
        if self.choice not in ("A", "B"):
            raise DataError(f"choice must be 'A' or 'B', got {self.choice!r}")


class ChoiceDataset:
    """Validated, immutable container of pairs and recorded choices.

    Internally keeps a dense int8 tensor ``choice[subject, pair, session]``
    with -1 for missing, 0 for A and 1 for B, which makes frequency and
    likelihood computations cheap.
    """

    def __init__(self, pairs: list[LotteryPair], observations: list[ChoiceObservation]):
        if not pairs:
            raise DataError("dataset needs at least one lottery pair")
        self.pairs = list(pairs)
        self.pair_ids = [p.pair_id for p in self.pairs]
        if len(set(self.pair_ids)) != len(self.pair_ids):
            raise DataError("duplicate pair_id in pair list")
        self._pair_index = {pid: i for i, pid in enumerate(self.pair_ids)}

        self.subjects = sorted({o.subject_id for o in observations})
        self._subject_index = {s: i for i, s in enumerate(self.subjects)}

        self.observations = sorted(
            observations, key=lambda o: (o.subject_id, o.pair_id, o.session)
        )

        ns, npairs = len(self.subjects), len(self.pairs)
        tensor = np.full((max(ns, 1), npairs, 2), -1, dtype=np.int8)
        for obs in self.observations:
            if obs.pair_id not in self._pair_index:
                raise DataError(f"observation references unknown pair {obs.pair_id!r}")
            i = self._subject_index[obs.subject_id]
            j = self._pair_index[obs.pair_id]
            k = obs.session - 1
            if tensor[i, j, k] != -1:
                raise DataError(
                    f"duplicate observation for ({obs.subject_id}, {obs.pair_id}, "
                    f"session {obs.session})"
                )
            tensor[i, j, k] = 0 if obs.choice == "A" else 1
        tensor.setflags(write=False)
        self.choice_tensor = tensor

    # -- indexing helpers -------------------------------------------------

    def pair_index(self, pair_id: str) -> int:
        try:
            return self._pair_index[pair_id]
        except KeyError:
            raise DataError(f"unknown pair_id {pair_id!r}") from None

    def subject_index(self, subject_id: str) -> int:
        try:
            return self._subject_index[subject_id]
        except KeyError:
            raise DataError(f"unknown subject_id {subject_id!r}") from None

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    def kinds(self) -> list[Kind]:
        return [p.kind for p in self.pairs]

    def completeness(self) -> float:
        """Fraction of (subject, pair, session) cells answered."""
        if not self.subjects:
            return 0.0
        return float(np.mean(self.choice_tensor >= 0))

    def has_session(self, session: int) -> bool:
        return bool(np.any(self.choice_tensor[:, :, session - 1] >= 0))

    # -- counts and frequencies -------------------------------------------

    def counts(self, session: int, subject_ids=None):
        """Per-pair (n_B, n_responses) integer arrays for one session."""
        sl = self.choice_tensor[self._subject_rows(subject_ids), :, session - 1]
        n_b = np.sum(sl == 1, axis=0)
        n = np.sum(sl >= 0, axis=0)
        return n_b, n

    def _subject_rows(self, subject_ids):
        if subject_ids is None:
            return slice(None)
        rows = [self.subject_index(s) for s in subject_ids]
        if not rows:
            raise DataError("empty subject filter")
        return np.asarray(sorted(rows))

    def choice_frequency(self, pair_id: str, session: int, subject_ids=None) -> float:
        """Fraction of responding subjects who chose B for this pair/session."""
        j = self.pair_index(pair_id)
        n_b, n = self.counts(session, subject_ids)
        if n[j] == 0:
            raise DataError(f"no observations for pair {pair_id!r} session {session}")
        return int(n_b[j]) / int(n[j])

    def majority_frequency(self, pair_id: str, session: int) -> float:
        """Frequency of the most common choice; exact ties give 0.5."""
        f_b = self.choice_frequency(pair_id, session)
        return max(f_b, 1.0 - f_b)

    def majority_choice(self, pair_id: str, session: int) -> str:
        """Most common choice; ties resolve to B by convention."""
        f_b = self.choice_frequency(pair_id, session)
        return "B" if f_b >= 0.5 else "A"

    def shift_frequency(self, pair_id: str) -> float:
        """Fraction of doubly-observed subjects whose choice differs between sessions."""
        j = self.pair_index(pair_id)
        c1 = self.choice_tensor[:, j, 0]
        c2 = self.choice_tensor[:, j, 1]
        both = (c1 >= 0) & (c2 >= 0)
        n = int(np.sum(both))
        if n == 0:
            raise DataError(f"no subjects observed at both sessions for pair {pair_id!r}")
        return int(np.sum(c1[both] != c2[both])) / n

    def majority_frequencies(self, session: int):
        """Array of per-pair majority frequencies plus the majority-choice codes."""
        n_b, n = self.counts(session)
        if np.any(n == 0):
            missing = [self.pair_ids[j] for j in np.nonzero(n == 0)[0]]
            raise DataError(f"pairs without observations in session {session}: {missing[:5]}")
        f_b = n_b / n
        majority = np.where(f_b >= 0.5, 1, 0).astype(np.int8)  # tie -> B
        return np.maximum(f_b, 1.0 - f_b), majority

    def subject_majority_stats(self):
        """Per-subject fraction of pairs matching the population majority choice.

        Returns ``(subjects, fractions)`` where fractions has shape
        (n_subjects, 2), one column per session; NaN where a subject answered
        nothing in a session.
        """
        fractions = np.full((self.n_subjects, 2), np.nan)
        for k, session in enumerate(SESSIONS):
            if not self.has_session(session):
                continue
            _, majority = self.majority_frequencies(session)
            sl = self.choice_tensor[:, :, k]
            answered = sl >= 0
            matches = (sl == majority[None, :]) & answered
            n_answered = answered.sum(axis=1)
            with np.errstate(invalid="ignore"):
                fractions[:, k] = np.where(
                    n_answered > 0, matches.sum(axis=1) / n_answered, np.nan
                )
        return list(self.subjects), fractions


# -- CSV ingestion ---------------------------------------------------------

def _parse_float(text: str, path: str, line: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{line}: cannot parse {col}={text!r} as a number") from None


def _open_skipping_comments(fh):
    """Pass through CSV lines, dropping leading '#' stamp lines."""
    for line in fh:
        if line.startswith("#"):
            continue
        yield line


def load_pairs(path: str, outcome_bound: float | None = 100.0) -> list[LotteryPair]:
    required = ["pair_id", "vA1", "pA1", "vA2", "vB1", "pB1", "vB2"]
    pairs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_open_skipping_comments(fh))
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in required):
            raise DataError(f"{path}:1: pairs header must contain {','.join(required)}")
        explicit_a = "pA2" in reader.fieldnames
        explicit_b = "pB2" in reader.fieldnames
        for line, row in enumerate(reader, start=2):
            try:
                p_a1 = _parse_float(row["pA1"], path, line, "pA1")
                p_b1 = _parse_float(row["pB1"], path, line, "pB1")
                p_a2 = _parse_float(row["pA2"], path, line, "pA2") if explicit_a else 1.0 - p_a1
                p_b2 = _parse_float(row["pB2"], path, line, "pB2") if explicit_b else 1.0 - p_b1
                lot_a = Lottery(
                    _parse_float(row["vA1"], path, line, "vA1"), p_a1,
                    _parse_float(row["vA2"], path, line, "vA2"), p_a2,
                )
                lot_b = Lottery(
                    _parse_float(row["vB1"], path, line, "vB1"), p_b1,
                    _parse_float(row["vB2"], path, line, "vB2"), p_b2,
                )
                if outcome_bound is not None:
                    lot_a.validate_outcome_bound(outcome_bound)
                    lot_b.validate_outcome_bound(outcome_bound)
                pairs.append(LotteryPair(row["pair_id"], lot_a, lot_b))
            except DataError as err:
                if str(err).startswith(path):
                    raise
                raise DataError(f"{path}:{line}: {err}") from None
    if not pairs:
        raise DataError(f"{path}: no pair rows")
    return pairs


def load_choices(path: str) -> list[ChoiceObservation]:
    required = ["subject_id", "pair_id", "session", "choice"]
    observations = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_open_skipping_comments(fh))
        if reader.fieldnames is None or any(c not in reader.fieldnames for c in required):
            raise DataError(f"{path}:1: choices header must contain {','.join(required)}")
        for line, row in enumerate(reader, start=2):
            if row["session"] not in ("1", "2"):
                raise DataError(f"{path}:{line}: session must be 1 or 2, got {row['session']!r}")
            try:
                observations.append(
                    ChoiceObservation(
                        row["subject_id"], row["pair_id"], int(row["session"]), row["choice"]
                    )
                )
            except DataError as err:
                raise DataError(f"{path}:{line}: {err}") from None
    return observations


def load_dataset(
    pairs_path: str, choices_path: str, outcome_bound: float | None = 100.0
) -> ChoiceDataset:
    """Load and validate a dataset from its two CSV files."""
    pairs = load_pairs(pairs_path, outcome_bound=outcome_bound)
    observations = load_choices(choices_path)
    return ChoiceDataset(pairs, observations)


def _format_prob(p: float) -> str:
    text = f"{p:.6f}".rstrip("0").rstrip(".")
    return text if text else "0"


def _format_outcome(v: float) -> str:
    return f"{v:g}"


def save_dataset(
    dataset: ChoiceDataset, pairs_path: str, choices_path: str, stamp: str | None = None
) -> None:
    """Write the two CSV files back out, order-normalized.

    ``stamp`` adds a leading ``# ...`` line (skipped on load) so callers can
    embed provenance such as a seed and config hash.
    """
    with open(pairs_path, "w", newline="", encoding="utf-8") as fh:
        if stamp:
            fh.write(f"# {stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "vA1", "pA1", "vA2", "vB1", "pB1", "vB2"])
        for pair in dataset.pairs:
            writer.writerow([
                pair.pair_id,
                _format_outcome(pair.lot_a.outcome1), _format_prob(pair.lot_a.prob1),
                _format_outcome(pair.lot_a.outcome2),
                _format_outcome(pair.lot_b.outcome1), _format_prob(pair.lot_b.prob1),
                _format_outcome(pair.lot_b.outcome2),
            ])
    with open(choices_path, "w", newline="", encoding="utf-8") as fh:
        if stamp:
            fh.write(f"# {stamp}\n")
        writer = csv.writer(fh)
        writer.writerow(["subject_id", "pair_id", "session", "choice"])
        for obs in dataset.observations:
            writer.writerow([obs.subject_id, obs.pair_id, obs.session, obs.choice])
