import numpy as np
import pytest

from pairshrink.data import (Dataset, ItemUniverse, ParseError, PartitionError,
                             RaschStructure, build_graph, detect_rasch,
                             is_strongly_connected, parse_comparisons,
                             restrict_to_largest_scc, split_folds)


def make_dataset(n, records):
    return Dataset(ItemUniverse(tuple(f"i{k}" for k in range(n))),
                   tuple(records))


class TestParse:
    def test_basic_rows(self):
        data = parse_comparisons("winner,loser\na,b\nb,a\na,b")
        assert data.n == 2
        assert data.N == 3
        assert data.records == ((0, 1), (1, 0), (0, 1))
        assert data.universe.items == ("a", "b")

    def test_count_expansion(self):
        data = parse_comparisons("winner,loser,count\nx,y,4")
        assert data.N == 4
        assert data.records == ((0, 1),) * 4

    def test_self_comparison_is_error(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_comparisons("winner,loser\na,a")

    def test_bad_count(self):
        with pytest.raises(ParseError, match="line 3"):
            parse_comparisons("winner,loser,count\na,b,1\na,b,0")
        with pytest.raises(ParseError, match="line 2"):
            parse_comparisons("winner,loser,count\na,b,x")

    def test_missing_field(self):
        with pytest.raises(ParseError, match="line 2"):
            parse_comparisons("winner,loser\na")

    def test_bad_header(self):
        with pytest.raises(ParseError, match="line 1"):
            parse_comparisons("foo,bar\na,b")

    def test_first_appearance_order(self):
        data = parse_comparisons("winner,loser\nz,q\nq,a\na,z")
        assert data.universe.items == ("z", "q", "a")

    def test_json_round_trip(self):
        data = parse_comparisons("winner,loser\na,b\nb,c\nc,a")
        again = Dataset.from_json(data.to_json())
        assert again.universe.items == data.universe.items
        assert again.records == data.records


class TestGraph:
    def test_counting(self):
        data = make_dataset(2, [(0, 1), (0, 1), (1, 0)])
        graph = build_graph(data)
        assert graph.M.tolist() == [[0, 2], [1, 0]]
        assert graph.B.tolist() == [[0, 3], [3, 0]]

    def test_empty(self):
        graph = build_graph(make_dataset(3, []))
        assert not graph.M.any()
        assert not graph.B.any()

    def test_cycle_has_three_matchups(self):
        graph = build_graph(make_dataset(3, [(0, 1), (1, 2), (2, 0)]))
        assert (graph.B > 0).sum() == 6  # three symmetric pairs

    def test_m_sums_to_n_records(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            recs = []
            for _ in range(int(rng.integers(0, 30))):
                i, j = rng.choice(n, size=2, replace=False)
                recs.append((int(i), int(j)))
            graph = build_graph(make_dataset(n, recs))
            assert graph.M.sum() == len(recs)
            assert np.array_equal(graph.B, graph.B.T)
            assert not np.diag(graph.B).any()


def _reachable(M):
    # brute-force transitive closure on the loser->winner edge convention
    n = M.shape[0]
    adj = (M.T > 0)
    reach = adj | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | (reach @ reach)
    return reach


class TestConnectivity:
    def test_mutual_pair(self):
        assert is_strongly_connected(build_graph(make_dataset(2, [(0, 1), (1, 0)])))

    def test_one_way(self):
        assert not is_strongly_connected(build_graph(make_dataset(2, [(0, 1), (0, 1)])))

    def test_three_cycle(self):
        assert is_strongly_connected(build_graph(make_dataset(3, [(0, 1), (1, 2), (2, 0)])))

    def test_matches_brute_force_closure(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(2, 7))
            M = (rng.random((n, n)) < 0.3).astype(np.int64)
            np.fill_diagonal(M, 0)
            recs = [(i, j) for i in range(n) for j in range(n)
                    for _ in range(M[i, j])]
            graph = build_graph(make_dataset(n, recs))
            assert is_strongly_connected(graph) == bool(_reachable(graph.M).all())


class TestRestrict:
    def test_drops_loser_only_item(self):
        data = make_dataset(3, [(0, 1), (1, 0), (0, 2), (1, 2)])
        restricted, removed = restrict_to_largest_scc(data)
        assert restricted.universe.items == ("i0", "i1")
        assert removed == ["i2"]
        assert restricted.records == ((0, 1), (1, 0))

    def test_round_robin_is_identity(self):
        recs = [(i, j) for i in range(4) for j in range(4) if i != j]
        data = make_dataset(4, recs)
        restricted, removed = restrict_to_largest_scc(data)
        assert removed == []
        assert restricted.records == data.records

    def test_no_core_is_error(self):
        data = make_dataset(3, [(0, 1), (1, 2)])
        with pytest.raises(ValueError, match="no estimable core"):
            restrict_to_largest_scc(data)

    def test_result_is_strongly_connected(self):
        rng = np.random.default_rng(3)
        kept = 0
        for _ in range(100):
            n = int(rng.integers(3, 7))
            recs = []
            for _ in range(int(rng.integers(2, 25))):
                i, j = rng.choice(n, size=2, replace=False)
                recs.append((int(i), int(j)))
            try:
                restricted, _ = restrict_to_largest_scc(make_dataset(n, recs))
            except ValueError:
                continue
            kept += 1
            assert is_strongly_connected(build_graph(restricted))
        assert kept > 10

    def test_tie_breaks_toward_smallest_index(self):
        # two 2-cycles of equal size; component containing item 0 wins
        data = make_dataset(4, [(0, 1), (1, 0), (2, 3), (3, 2)])
        restricted, removed = restrict_to_largest_scc(data)
        assert restricted.universe.items == ("i0", "i1")
        assert removed == ["i2", "i3"]


class TestFolds:
    def test_two_folds_cover_everything(self):
        data = make_dataset(3, [(0, 1), (1, 2), (2, 0), (1, 0)])
        folds = split_folds(data, 2, seed=0)
        assert len(folds) == 2
        tests = [rec for _, test in folds for rec in test.records]
        assert sorted(tests) == sorted(data.records)
        for train, test in folds:
            assert train.N + test.N == data.N

    def test_seed_determinism(self):
        data = make_dataset(3, [(0, 1), (1, 2), (2, 0), (1, 0), (2, 1)])
        a = split_folds(data, 2, seed=42)
        b = split_folds(data, 2, seed=42)
        assert all(x[0].records == y[0].records and x[1].records == y[1].records
                   for x, y in zip(a, b))

    def test_uneven_sizes(self):
        data = make_dataset(3, [(0, 1)] * 5)
        folds = split_folds(data, 2, seed=0)
        assert sorted(test.N for _, test in folds) == [2, 3]

    def test_k_too_large(self):
        data = make_dataset(2, [(0, 1), (1, 0)])
        with pytest.raises(ValueError):
            split_folds(data, 3, seed=0)
        with pytest.raises(ValueError):
            split_folds(data, 1, seed=0)

    def test_disjoint_test_folds(self):
        data = make_dataset(4, [(i % 4, (i + 1) % 4) for i in range(17)])
        folds = split_folds(data, 4, seed=9)
        counts = sum(test.N for _, test in folds)
        assert counts == data.N


class TestRasch:
    def test_recovers_bipartition(self):
        data = make_dataset(4, [(0, 2), (2, 1), (3, 0), (1, 3)])
        structure = detect_rasch(data)
        assert structure is not None
        g = structure.groups
        assert g[0] == g[1] != g[2] == g[3]

    def test_triangle_is_not_bipartite(self):
        data = make_dataset(3, [(0, 1), (1, 2), (2, 0)])
        assert detect_rasch(data) is None

    def test_declared_violation(self):
        data = make_dataset(4, [(0, 2), (0, 1)])
        with pytest.raises(PartitionError, match="record 1"):
            detect_rasch(data, declared_partition=(0, 0, 1, 1))

    def test_declared_valid(self):
        data = make_dataset(4, [(0, 2), (3, 1)])
        structure = detect_rasch(data, declared_partition=(0, 0, 1, 1))
        assert structure == RaschStructure((0, 0, 1, 1))
        assert structure.group_sizes == (2, 2)

    def test_no_comparisons_gives_none(self):
        assert detect_rasch(make_dataset(3, [])) is None
