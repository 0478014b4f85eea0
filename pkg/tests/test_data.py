import numpy as np
import pytest

from riskchoice.data import (
    ChoiceDataset,
    ChoiceObservation,
    DataError,
    Kind,
    Lottery,
    LotteryPair,
    classify_kind,
    load_dataset,
    save_dataset,
)


def make_pair(pid="P1", a=(10, 0.5, 20), b=(5, 0.5, 30)):
    lot_a = Lottery(a[0], a[1], a[2], 1 - a[1])
    lot_b = Lottery(b[0], b[1], b[2], 1 - b[1])
    return LotteryPair(pid, lot_a, lot_b)


class TestLottery:
    def test_probability_sum_enforced(self):
        with pytest.raises(DataError):
            Lottery(10, 0.6, 20, 0.5)

    def test_probability_range(self):
        with pytest.raises(DataError):
            Lottery(10, 1.2, 20, -0.2)

    def test_finite_outcomes(self):
        with pytest.raises(DataError):
            Lottery(float("inf"), 0.5, 0, 0.5)

    def test_expected_value(self):
        lot = Lottery(56, 0.05, 72, 0.95)
        assert lot.expected_value() == pytest.approx(71.2)

    def test_outcome_bound(self):
        lot = Lottery(150, 0.5, 0, 0.5)
        with pytest.raises(DataError):
            lot.validate_outcome_bound(100)
        lot.validate_outcome_bound(200)


class TestClassifyKind:
    def test_pure_gain(self):
        assert classify_kind(Lottery(1, 0.5, 2, 0.5), Lottery(3, 0.5, 4, 0.5)) == Kind.PURE_GAIN

    def test_pure_loss(self):
        lot_a = Lottery(-8, 0.66, -95, 0.34)
        lot_b = Lottery(-42, 0.93, -30, 0.07)
        assert classify_kind(lot_a, lot_b) == Kind.PURE_LOSS

    def test_mixed_zero(self):
        gain = Lottery(50, 0.5, 0, 0.5)
        loss = Lottery(-30, 0.5, 0, 0.5)
        assert classify_kind(gain, loss) == Kind.MIXED_ZERO
        assert classify_kind(loss, gain) == Kind.MIXED_ZERO

    def test_mixed(self):
        assert classify_kind(Lottery(96, 0.61, -67, 0.39), Lottery(71, 0.5, -26, 0.5)) == Kind.MIXED

    def test_zero_without_pattern_is_mixed(self):
        # both zeros on the same side of the pattern, or a zero with two gains
        assert classify_kind(Lottery(50, 0.5, 0, 0.5), Lottery(30, 0.5, 0, 0.5)) == Kind.MIXED
        assert classify_kind(Lottery(50, 0.5, 0, 0.5), Lottery(1, 0.5, 2, 0.5)) == Kind.MIXED

    def test_stored_kind_must_match(self):
        lot_a = Lottery(1, 0.5, 2, 0.5)
        lot_b = Lottery(3, 0.5, 4, 0.5)
        with pytest.raises(DataError):
            LotteryPair("P1", lot_a, lot_b, kind=Kind.PURE_LOSS)


def obs(sid, pid, session, choice):
    return ChoiceObservation(sid, pid, session, choice)


class TestChoiceDataset:
    def test_duplicate_observation_rejected(self):
        pair = make_pair()
        with pytest.raises(DataError):
            ChoiceDataset([pair], [obs("s1", "P1", 1, "A"), obs("s1", "P1", 1, "B")])

    def test_unknown_pair_rejected(self):
        with pytest.raises(DataError):
            ChoiceDataset([make_pair()], [obs("s1", "P9", 1, "A")])

    def test_choice_frequency(self):
        pair = make_pair()
        observations = [obs(f"s{i}", "P1", 1, "B" if i < 71 else "A") for i in range(142)]
        ds = ChoiceDataset([pair], observations)
        assert ds.choice_frequency("P1", 1) == pytest.approx(0.5)

    def test_all_choose_a(self):
        ds = ChoiceDataset([make_pair()], [obs(f"s{i}", "P1", 1, "A") for i in range(10)])
        assert ds.choice_frequency("P1", 1) == 0.0

    def test_frequencies_sum_to_one_exactly(self):
        rng = np.random.default_rng(0)
        observations = [
            obs(f"s{i}", "P1", 1, "B" if rng.random() < 0.37 else "A") for i in range(101)
        ]
        ds = ChoiceDataset([make_pair()], observations)
        f_b = ds.choice_frequency("P1", 1)
        f_a = 1.0 - f_b
        assert f_a + f_b == 1.0

    def test_sampling_oracle_frequency(self):
        # binomial draws at p_B = 0.8 over 10,000 subjects land within 2%
        rng = np.random.default_rng(42)
        observations = [
            obs(f"s{i}", "P1", 1, "B" if rng.random() < 0.8 else "A") for i in range(10_000)
        ]
        ds = ChoiceDataset([make_pair()], observations)
        assert ds.choice_frequency("P1", 1) == pytest.approx(0.8, abs=0.02)

    def test_no_observations_errors(self):
        ds = ChoiceDataset([make_pair()], [obs("s1", "P1", 1, "A")])
        with pytest.raises(DataError):
            ds.choice_frequency("P1", 2)

    def test_majority_frequency(self):
        observations = [obs(f"s{i}", "P1", 1, "B" if i < 3 else "A") for i in range(10)]
        ds = ChoiceDataset([make_pair()], observations)
        assert ds.majority_frequency("P1", 1) == pytest.approx(0.7)
        assert ds.majority_choice("P1", 1) == "A"

    def test_majority_tie_is_half_and_b(self):
        observations = [obs(f"s{i}", "P1", 1, "B" if i < 5 else "A") for i in range(10)]
        ds = ChoiceDataset([make_pair()], observations)
        assert ds.majority_frequency("P1", 1) == 0.5
        assert ds.majority_choice("P1", 1) == "B"

    def test_majority_sampling_oracle(self):
        rng = np.random.default_rng(1)
        observations = [
            obs(f"s{i}", "P1", 1, "B" if rng.random() < 0.9 else "A") for i in range(10_000)
        ]
        ds = ChoiceDataset([make_pair()], observations)
        assert ds.majority_frequency("P1", 1) == pytest.approx(0.9, abs=0.02)


class TestShiftFrequency:
    def test_all_repeat(self):
        observations = []
        for i in range(20):
            observations += [obs(f"s{i}", "P1", 1, "A"), obs(f"s{i}", "P1", 2, "A")]
        ds = ChoiceDataset([make_pair()], observations)
        assert ds.shift_frequency("P1") == 0.0

    def test_all_flip(self):
        observations = []
        for i in range(20):
            observations += [obs(f"s{i}", "P1", 1, "A"), obs(f"s{i}", "P1", 2, "B")]
        ds = ChoiceDataset([make_pair()], observations)
        assert ds.shift_frequency("P1") == 1.0

    def test_monte_carlo_matches_two_p_one_minus_p(self):
        # independent sessions at p = 0.75: shift probability 2*0.75*0.25
        rng = np.random.default_rng(11)
        observations = []
        for i in range(10_000):
            for session in (1, 2):
                observations.append(
                    obs(f"s{i}", "P1", session, "B" if rng.random() < 0.75 else "A")
                )
        ds = ChoiceDataset([make_pair()], observations)
        assert ds.shift_frequency("P1") == pytest.approx(0.375, abs=0.02)

    def test_relabel_invariance(self):
        rng = np.random.default_rng(5)
        original, flipped = [], []
        for i in range(200):
            for session in (1, 2):
                c = "B" if rng.random() < 0.6 else "A"
                original.append(obs(f"s{i}", "P1", session, c))
                flipped.append(obs(f"s{i}", "P1", session, "A" if c == "B" else "B"))
        pair = make_pair()
        assert (
            ChoiceDataset([pair], original).shift_frequency("P1")
            == ChoiceDataset([pair], flipped).shift_frequency("P1")
        )

    def test_subject_missing_one_session_excluded(self):
        observations = [
            obs("s1", "P1", 1, "A"), obs("s1", "P1", 2, "B"),
            obs("s2", "P1", 1, "A"),  # no session 2
        ]
        ds = ChoiceDataset([make_pair()], observations)
        assert ds.shift_frequency("P1") == 1.0


class TestSubjectMajorityStats:
    def test_single_subject_is_majority(self):
        pairs = [make_pair("P1"), make_pair("P2")]
        observations = [
            obs("s1", "P1", 1, "A"), obs("s1", "P2", 1, "B"),
            obs("s1", "P1", 2, "B"), obs("s1", "P2", 2, "A"),
        ]
        ds = ChoiceDataset(pairs, observations)
        subjects, fractions = ds.subject_majority_stats()
        assert subjects == ["s1"]
        assert fractions[0, 0] == 1.0 and fractions[0, 1] == 1.0

    def test_contrarian_against_strict_majority(self):
        pairs = [make_pair("P1"), make_pair("P2")]
        observations = []
        for i in range(5):  # strict majority chooses A everywhere
            for pid in ("P1", "P2"):
                for session in (1, 2):
                    observations.append(obs(f"m{i}", pid, session, "A"))
        for pid in ("P1", "P2"):
            for session in (1, 2):
                observations.append(obs("rebel", pid, session, "B"))
        ds = ChoiceDataset(pairs, observations)
        subjects, fractions = ds.subject_majority_stats()
        rebel = subjects.index("rebel")
        assert fractions[rebel, 0] == 0.0 and fractions[rebel, 1] == 0.0


class TestCsvRoundTrip:
    def test_load_minimal_file(self, tmp_path):
        pairs_csv = tmp_path / "pairs.csv"
        choices_csv = tmp_path / "choices.csv"
        pairs_csv.write_text(
            "pair_id,vA1,pA1,vA2,vB1,pB1,vB2\nP1,56,0.05,72,68,0.95,95\n"
        )
        choices_csv.write_text(
            "subject_id,pair_id,session,choice\ns1,P1,1,A\ns1,P1,2,B\n"
        )
        ds = load_dataset(str(pairs_csv), str(choices_csv))
        assert ds.n_pairs == 1 and ds.n_subjects == 1 and len(ds.observations) == 2
        pair = ds.pairs[0]
        assert pair.kind == Kind.PURE_GAIN
        assert pair.lot_a.expected_value() == pytest.approx(71.2)
        assert pair.lot_b.expected_value() == pytest.approx(69.35)

    def test_probability_sum_error_with_explicit_columns(self, tmp_path):
        pairs_csv = tmp_path / "pairs.csv"
        pairs_csv.write_text(
            "pair_id,vA1,pA1,pA2,vA2,vB1,pB1,vB2\nP1,10,0.6,0.5,20,5,0.5,30\n"
        )
        with pytest.raises(DataError, match="sum to 1"):
            load_dataset(str(pairs_csv), str(pairs_csv))

    def test_duplicate_row_rejected(self, tmp_path):
        pairs_csv = tmp_path / "pairs.csv"
        choices_csv = tmp_path / "choices.csv"
        pairs_csv.write_text("pair_id,vA1,pA1,vA2,vB1,pB1,vB2\nP1,1,0.5,2,3,0.5,4\n")
        choices_csv.write_text(
            "subject_id,pair_id,session,choice\ns1,P1,1,A\ns1,P1,1,B\n"
        )
        with pytest.raises(DataError, match="duplicate"):
            load_dataset(str(pairs_csv), str(choices_csv))

    def test_parse_error_names_line(self, tmp_path):
        pairs_csv = tmp_path / "pairs.csv"
        pairs_csv.write_text("pair_id,vA1,pA1,vA2,vB1,pB1,vB2\nP1,1,xx,2,3,0.5,4\n")
        with pytest.raises(DataError, match=r":2:"):
            load_dataset(str(pairs_csv), str(pairs_csv))

    def test_outcome_bound_enforced_and_optional(self, tmp_path):
        pairs_csv = tmp_path / "pairs.csv"
        choices_csv = tmp_path / "choices.csv"
        pairs_csv.write_text("pair_id,vA1,pA1,vA2,vB1,pB1,vB2\nP1,500,0.5,2,3,0.5,4\n")
        choices_csv.write_text("subject_id,pair_id,session,choice\ns1,P1,1,A\n")
        with pytest.raises(DataError, match="outside"):
            load_dataset(str(pairs_csv), str(choices_csv))
        ds = load_dataset(str(pairs_csv), str(choices_csv), outcome_bound=None)
        assert ds.n_pairs == 1

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        pairs = [make_pair(f"P{j}", (j + 1, 0.35, 2 * j + 1), (j + 2, 0.65, j + 5)) for j in range(4)]
        observations = []
        for i in range(6):
            for j in range(4):
                for session in (1, 2):
                    if rng.random() < 0.9:
                        observations.append(
                            obs(f"s{i}", f"P{j}", session, "B" if rng.random() < 0.5 else "A")
                        )
        ds = ChoiceDataset(pairs, observations)
        p1, c1 = tmp_path / "p.csv", tmp_path / "c.csv"
        save_dataset(ds, str(p1), str(c1))
        ds2 = load_dataset(str(p1), str(c1))
        assert ds2.observations == ds.observations
        assert [p.pair_id for p in ds2.pairs] == [p.pair_id for p in ds.pairs]
        for a, b in zip(ds.pairs, ds2.pairs):
            assert a.lot_a == b.lot_a and a.lot_b == b.lot_b

        p2, c2 = tmp_path / "p2.csv", tmp_path / "c2.csv"
        save_dataset(ds2, str(p2), str(c2))
        assert p1.read_text() == p2.read_text()
        assert c1.read_text() == c2.read_text()
