import numpy as np
import pytest

from blendaug.closedict import (
    CloseDict,
    DictFormatError,
    default_inventory,
    load_dict,
    load_inventory,
    pick_distant,
    pick_donor,
    starter_dict_path,
)


def write_dict(tmp_path, text):
    path = tmp_path / "pairs.tsv"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadDict:
    def test_table_entries(self, tmp_path):
        path = write_dict(tmp_path, "SH\tS\t0.76\nZ\tS\t0.77\n")
        close = load_dict(path)
        assert close.donors("SH") == (("S", 0.76),)
        assert close.donors("Z") == (("S", 0.77),)

    def test_self_pair_rejected(self, tmp_path):
        path = write_dict(tmp_path, "SH\tSH\t0.5\n")
        with pytest.raises(DictFormatError, match="line 1.*self-pair"):
            load_dict(path)

    def test_duplicate_pair_rejected(self, tmp_path):
        path = write_dict(tmp_path, "SH\tS\t0.76\nSH\tS\t0.5\n")
        with pytest.raises(DictFormatError, match="line 2.*duplicate"):
            load_dict(path)

    def test_unknown_phone_rejected(self, tmp_path):
        path = write_dict(tmp_path, "QQ\tS\t0.5\n")
        with pytest.raises(DictFormatError, match="unknown phone"):
            load_dict(path)

    def test_weight_range(self, tmp_path):
        for bad in ("0", "1.5", "-0.1"):
            path = write_dict(tmp_path, f"SH\tS\t{bad}\n")
            with pytest.raises(DictFormatError, match="weight"):
                load_dict(path)

    def test_malformed_line(self, tmp_path):
        path = write_dict(tmp_path, "SH\tS\n")
        with pytest.raises(DictFormatError, match="3 tab-separated"):
            load_dict(path)

    def test_comments_and_blanks(self, tmp_path):
        path = write_dict(tmp_path, "# comment\n\nSH\tS\t0.76\n")
        assert load_dict(path).donors("SH") == (("S", 0.76),)

    def test_starter_dict_has_both_directions(self):
        close = load_dict(starter_dict_path())
        pairs = {(c, d) for c, donors in close.entries.items() for d, _ in donors}
        for a, b in [("SH", "S"), ("V", "F"), ("NG", "N"), ("IY", "IH"), ("Z", "S")]:
            assert (a, b) in pairs
            assert (b, a) in pairs
        assert len(pairs) == 10

    def test_default_inventory_size(self):
        assert len(default_inventory()) == 42

    def test_load_inventory(self, tmp_path):
        path = tmp_path / "phones.txt"
        path.write_text("# inventory\nAA\nBB\n", encoding="utf-8")
        assert load_inventory(path) == frozenset({"AA", "BB"})


class TestCloseDictInvariants:
    def test_self_pair_in_constructor(self):
        with pytest.raises(ValueError, match="self-pair"):
            CloseDict({"A": (("A", 0.5),)}, frozenset({"A", "B"}))

    def test_weight_in_constructor(self):
        with pytest.raises(ValueError, match="weight"):
            CloseDict({"A": (("B", 0.0),)}, frozenset({"A", "B"}))

    def test_inventory_membership(self):
        with pytest.raises(ValueError, match="not in inventory"):
            CloseDict({"A": (("C", 0.5),)}, frozenset({"A", "B"}))


class TestPickDonor:
    def test_single_entry_always_returned(self):
        close = CloseDict({"SH": (("S", 0.76),)}, frozenset({"SH", "S"}))
        rng = np.random.default_rng(0)
        assert all(pick_donor(close, "SH", rng) == "S" for _ in range(20))

    def test_no_entries_gives_none(self):
        close = CloseDict({}, frozenset({"SH", "S"}))
        assert pick_donor(close, "SH", np.random.default_rng(0)) is None

    def test_weighted_frequencies(self):
        # law-of-large-numbers oracle over a fixed seed
        close = CloseDict({"X": (("A", 0.75), ("B", 0.25))}, frozenset({"X", "A", "B"}))
        rng = np.random.default_rng(42)
        draws = [pick_donor(close, "X", rng) for _ in range(100_000)]
        freq_a = draws.count("A") / len(draws)
        assert abs(freq_a - 0.75) <= 0.02

    def test_uniform_mode(self):
        close = CloseDict({"X": (("A", 0.9), ("B", 0.1))}, frozenset({"X", "A", "B"}))
        rng = np.random.default_rng(42)
        draws = [pick_donor(close, "X", rng, weighting="uniform") for _ in range(100_000)]
        assert abs(draws.count("A") / len(draws) - 0.5) <= 0.02

    def test_never_returns_candidate(self):
        close = load_dict(starter_dict_path())
        rng = np.random.default_rng(7)
        for _ in range(1000):
            donor = pick_donor(close, "S", rng)
            assert donor in {"SH", "Z"}

    def test_deterministic_under_seed(self):
        close = load_dict(starter_dict_path())
        first = [pick_donor(close, "S", np.random.default_rng(99)) for _ in range(1)]
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(123)
            runs.append([pick_donor(close, "S", rng) for _ in range(50)])
        assert runs[0] == runs[1]
        assert first  # seed 99 draw exists; no assertion on its value


class TestPickDistant:
    def test_forced_choice(self):
        close = CloseDict({"SH": (("S", 0.76),)}, frozenset({"SH", "S", "V"}))
        rng = np.random.default_rng(1)
        assert all(pick_distant(close, "SH", rng) == "V" for _ in range(20))

    def test_excludes_candidate_and_close_set(self):
        close = load_dict(starter_dict_path())
        rng = np.random.default_rng(5)
        banned = {"S"} | set(close.close_set("S"))
        for _ in range(10_000):
            assert pick_distant(close, "S", rng) not in banned

    def test_uniformity(self):
        close = load_dict(starter_dict_path())
        eligible = sorted(close.inventory - {"SH"} - close.close_set("SH"))
        rng = np.random.default_rng(42)
        counts = {phone: 0 for phone in eligible}
        n = 100_000
        for _ in range(n):
            counts[pick_distant(close, "SH", rng)] += 1
        expected = 1.0 / len(eligible)
        for phone, count in counts.items():
            assert abs(count / n - expected) <= 0.02

    def test_empty_distant_set(self):
        close = CloseDict({"A": (("B", 0.5),)}, frozenset({"A", "B"}))
        with pytest.raises(ValueError, match="no distant phone"):
            pick_distant(close, "A", np.random.default_rng(0))
