import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from careflow.clustering import ClusterAssignment, SpectralParams
from careflow.geo import DistanceMatrix
from careflow.ingest import Discipline
from careflow.metrics import (
    CentroidMissing,
    CoincidentCentroids,
    UndefinedDegenerate,
    UndefinedForSingleCluster,
    ampm,
    atpm,
    calinski_harabasz,
    davies_bouldin,
    metrics_report,
    percent_decrease,
)
from tests.conftest import matrix_from

PARAMS = SpectralParams(embed_dim=2)


def assignment(labels, patient_ids, centroid_of, C=None):
    return ClusterAssignment(
        discipline=Discipline.RN,
        C=C or (max(labels) + 1),
        labels=tuple(labels),
        patient_ids=tuple(patient_ids),
        params=PARAMS,
        seed=0,
        centroid_of=centroid_of,
    )


@pytest.fixture
def two_patient_cluster():
    """One cluster: centroid c, patients p1, p2; d(c,p1)=d(c,p2)=3, d(p1,p2)=4."""
    D = matrix_from(
        ["c", "p1", "p2"],
        [[0.0, 3.0, 3.0], [3.0, 0.0, 4.0], [3.0, 4.0, 0.0]],
    )
    a = assignment([0, 0], ["p1", "p2"], {0: "c"}, C=1)
    return a, D


class TestAmpm:
    def test_colocated_singleton_zero(self):
        D = matrix_from(["c", "p1"], [[0.0, 0.0], [0.0, 0.0]])
        a = assignment([0], ["p1"], {0: "c"}, C=1)
        assert ampm(a, D, 0.7) == 0.0

    def test_hand_value(self, two_patient_cluster):
        a, D = two_patient_cluster
        assert ampm(a, D, 0.5) == pytest.approx(7.5, abs=1e-9)

    def test_two_congruent_clusters_same_value(self):
        D = matrix_from(
            ["c1", "p1", "p2", "c2", "q1", "q2"],
            [
                [0.0, 3.0, 3.0, 50.0, 50.0, 50.0],
                [3.0, 0.0, 4.0, 50.0, 50.0, 50.0],
                [3.0, 4.0, 0.0, 50.0, 50.0, 50.0],
                [50.0, 50.0, 50.0, 0.0, 3.0, 3.0],
                [50.0, 50.0, 50.0, 3.0, 0.0, 4.0],
                [50.0, 50.0, 50.0, 3.0, 4.0, 0.0],
            ],
        )
        a = assignment([0, 0, 1, 1], ["p1", "p2", "q1", "q2"], {0: "c1", 1: "c2"})
        assert ampm(a, D, 0.5) == pytest.approx(7.5, abs=1e-9)

    def test_missing_centroid(self, two_patient_cluster):
        a, D = two_patient_cluster
        stripped = assignment([0, 0], ["p1", "p2"], None, C=1)
        with pytest.raises(CentroidMissing):
            ampm(stripped, D, 0.5)

    def test_complement_weighting(self, two_patient_cluster):
        a, D = two_patient_cluster
        # additive: 0.5*3 + 1.5*4 = 7.5 ; complement: 0.5*3 + 0.5*4 = 3.5
        assert ampm(a, D, 0.5, weighting="complement") == pytest.approx(3.5, abs=1e-9)

    def test_per_cluster_gamma_sequence(self, two_patient_cluster):
        a, D = two_patient_cluster
        assert ampm(a, D, [0.5]) == pytest.approx(7.5, abs=1e-9)


class TestAtpm:
    def test_hand_value(self, two_patient_cluster):
        a, D = two_patient_cluster
        # 0.5*(3+3) + 1.5*(4+4) = 15.0
        assert atpm(a, D, 0.5) == pytest.approx(15.0, abs=1e-9)

    def test_singleton_cluster(self):
        D = matrix_from(["c", "p1"], [[0.0, 5.0], [5.0, 0.0]])
        a = assignment([0], ["p1"], {0: "c"}, C=1)
        assert atpm(a, D, 0.4) == pytest.approx(2.0, abs=1e-9)

    def test_ampm_le_atpm(self, two_patient_cluster):
        a, D = two_patient_cluster
        assert ampm(a, D, 0.5) <= atpm(a, D, 0.5)


class TestCalinskiHarabasz:
    def _two_cluster(self):
        D = matrix_from(
            ["c1", "c2", "p1", "p2", "p3", "p4"],
            [
                [0.0, 10.0, 1.0, 2.0, 9.0, 11.0],
                [10.0, 0.0, 11.0, 9.0, 1.0, 2.0],
                [1.0, 11.0, 0.0, 3.0, 10.0, 12.0],
                [2.0, 9.0, 3.0, 0.0, 8.0, 10.0],
                [9.0, 1.0, 10.0, 8.0, 0.0, 3.0],
                [11.0, 2.0, 12.0, 10.0, 3.0, 0.0],
            ],
        )
        a = assignment([0, 0, 1, 1], ["p1", "p2", "p3", "p4"], {0: "c1", 1: "c2"})
        return a, D

    def test_single_cluster_undefined(self, two_patient_cluster):
        a, D = two_patient_cluster
        with pytest.raises(UndefinedForSingleCluster):
            calinski_harabasz(a, D, 2)

    def test_degenerate_zero_within(self):
        D = matrix_from(
            ["c1", "c2", "p1", "p2"],
            [
                [0.0, 10.0, 0.0, 10.0],
                [10.0, 0.0, 10.0, 0.0],
                [0.0, 10.0, 0.0, 10.0],
                [10.0, 0.0, 10.0, 0.0],
            ],
        )
        a = assignment([0, 1], ["p1", "p2"], {0: "c1", 1: "c2"})
        with pytest.raises(UndefinedDegenerate):
            calinski_harabasz(a, D, 2)

    def test_matches_independent_oracle(self):
        a, D = self._two_cluster()
        # independent direct evaluation of the same formula
        members = {0: ["p1", "p2"], 1: ["p3", "p4"]}
        centroid = {0: "c1", 1: "c2"}
        between = sum(
            D.between(p, centroid[k]) for k, ps in members.items() for p in ps
        )
        within = sum(
            D.between(i, j)
            for ps in members.values()
            for i, j in itertools.permutations(ps, 2)
        )
        C, N = 2, 4
        expected = (between / (C - 1)) * ((N - C) / within)
        assert calinski_harabasz(a, D, N) == pytest.approx(expected, abs=1e-9)


class TestDaviesBouldin:
    def test_two_singletons_at_centroids(self):
        D = matrix_from(
            ["c1", "c2", "p1", "p2"],
            [
                [0.0, 10.0, 0.0, 10.0],
                [10.0, 0.0, 10.0, 0.0],
                [0.0, 10.0, 0.0, 10.0],
                [10.0, 0.0, 10.0, 0.0],
            ],
        )
        a = assignment([0, 1], ["p1", "p2"], {0: "c1", 1: "c2"})
        assert davies_bouldin(a, D) == pytest.approx(0.0, abs=1e-12)

    def test_coincident_centroids(self):
        D = matrix_from(
            ["c1", "c2", "p1", "p2"],
            [
                [0.0, 0.0, 1.0, 2.0],
                [0.0, 0.0, 1.0, 2.0],
                [1.0, 1.0, 0.0, 3.0],
                [2.0, 2.0, 3.0, 0.0],
            ],
        )
        a = assignment([0, 1], ["p1", "p2"], {0: "c1", 1: "c2"})
        with pytest.raises(CoincidentCentroids):
            davies_bouldin(a, D)

    def test_matches_independent_oracle(self):
        D = matrix_from(
            ["c1", "c2", "p1", "p2", "p3", "p4", "p5", "p6"],
            np.array(
                [
                    [0.0, 12.0, 1.0, 2.0, 1.5, 11.0, 12.5, 13.0],
                    [12.0, 0.0, 11.5, 12.0, 12.5, 1.0, 2.0, 1.5],
                    [1.0, 11.5, 0.0, 2.5, 2.0, 10.0, 12.0, 12.5],
                    [2.0, 12.0, 2.5, 0.0, 3.0, 11.0, 12.0, 13.0],
                    [1.5, 12.5, 2.0, 3.0, 0.0, 11.5, 13.0, 12.0],
                    [11.0, 1.0, 10.0, 11.0, 11.5, 0.0, 2.5, 2.0],
                    [12.5, 2.0, 12.0, 12.0, 13.0, 2.5, 0.0, 3.0],
                    [13.0, 1.5, 12.5, 13.0, 12.0, 2.0, 3.0, 0.0],
                ]
            ).tolist(),
        )
        a = assignment(
            [0, 0, 0, 1, 1, 1],
            ["p1", "p2", "p3", "p4", "p5", "p6"],
            {0: "c1", 1: "c2"},
        )
        members = {0: ["p1", "p2", "p3"], 1: ["p4", "p5", "p6"]}
        centroid = {0: "c1", 1: "c2"}
        scatter = {
            k: sum(D.between(p, centroid[k]) for p in ps) / len(ps)
            for k, ps in members.items()
        }
        expected = 0.0
        for u in (0, 1):
            worst = max(
                (scatter[u] + scatter[v]) / D.between(centroid[u], centroid[v])
                for v in (0, 1)
                if v != u
            )
            expected += worst
        expected /= 2
        assert davies_bouldin(a, D) == pytest.approx(expected, abs=1e-9)

    def test_symmetric_instance_r_symmetry(self):
        D = matrix_from(
            ["c1", "c2", "p1", "p2"],
            [
                [0.0, 10.0, 2.0, 12.0],
                [10.0, 0.0, 12.0, 2.0],
                [2.0, 12.0, 0.0, 14.0],
                [12.0, 2.0, 14.0, 0.0],
            ],
        )
        a = assignment([0, 1], ["p1", "p2"], {0: "c1", 1: "c2"})
        # R_01 == R_10 == (2+2)/10 = 0.4, so S_DB == 0.4
        assert davies_bouldin(a, D) == pytest.approx(0.4, abs=1e-12)


class TestPercentDecrease:
    def test_rn_row(self):
        assert percent_decrease(13.3700, 7.7048) == pytest.approx(42.37, abs=0.01)

    def test_ot_gamma_lim_row(self):
        assert percent_decrease(23.9360, 12.1524) == pytest.approx(49.23, abs=0.01)

    def test_equal_values_zero(self):
        assert percent_decrease(5.0, 5.0) == 0.0

    def test_non_positive_current_rejected(self):
        with pytest.raises(ValueError):
            percent_decrease(0.0, 1.0)


class TestProperties:
    def _random_case(self, rng, n_clusters=2, per=3):
        n = n_clusters * per
        ids = [f"p{i}" for i in range(n)]
        cents = [f"c{k}" for k in range(n_clusters)]
        labels = [i % n_clusters for i in range(n)]
        coords = rng.uniform(0, 100, size=(n + n_clusters, 2))
        all_labels = ids + cents
        vals = np.zeros((len(all_labels), len(all_labels)))
        for i in range(len(all_labels)):
            for j in range(len(all_labels)):
                vals[i, j] = float(np.hypot(*(coords[i] - coords[j])))
        np.fill_diagonal(vals, 0.0)
        D = DistanceMatrix(labels=tuple(all_labels), values=vals)
        a = assignment(labels, ids, {k: f"c{k}" for k in range(n_clusters)})
        return a, D

    def test_scale_equivariance(self, rng):
        a, D = self._random_case(rng)
        s = 2.5
        scaled = DistanceMatrix(labels=D.labels, values=D.values * s)
        assert ampm(a, scaled, 0.4) == pytest.approx(s * ampm(a, D, 0.4), rel=1e-12)
        assert atpm(a, scaled, 0.4) == pytest.approx(s * atpm(a, D, 0.4), rel=1e-12)

    def test_gamma_monotonicity(self, rng):
        a, D = self._random_case(rng)
        assert ampm(a, D, 0.3) <= ampm(a, D, 0.4)

    def test_label_permutation_invariance(self, rng):
        a, D = self._random_case(rng, n_clusters=3, per=2)
        # swap cluster labels 0 and 2 everywhere
        perm = {0: 2, 1: 1, 2: 0}
        b = ClusterAssignment(
            discipline=a.discipline,
            C=a.C,
            labels=tuple(perm[l] for l in a.labels),
            patient_ids=a.patient_ids,
            params=a.params,
            seed=a.seed,
            centroid_of={perm[k]: v for k, v in a.centroid_of.items()},
        )
        assert ampm(b, D, 0.4) == pytest.approx(ampm(a, D, 0.4), rel=1e-12)
        assert atpm(b, D, 0.4) == pytest.approx(atpm(a, D, 0.4), rel=1e-12)
        assert davies_bouldin(b, D) == pytest.approx(davies_bouldin(a, D), rel=1e-12)

    @given(st.floats(min_value=0.0, max_value=1.0), st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=40)
    def test_gamma_ordering_property(self, g1, g2):
        D = matrix_from(
            ["c", "p1", "p2"],
            [[0.0, 3.0, 3.0], [3.0, 0.0, 4.0], [3.0, 4.0, 0.0]],
        )
        a = assignment([0, 0], ["p1", "p2"], {0: "c"}, C=1)
        lo, hi = sorted((g1, g2))
        assert ampm(a, D, lo) <= ampm(a, D, hi) + 1e-12


class TestReport:
    def test_report_shape_and_fallbacks(self, two_patient_cluster):
        a, D = two_patient_cluster
        report = metrics_report(a, D, 0.5)
        assert report.ampm == pytest.approx(7.5, abs=1e-9)
        assert report.atpm == pytest.approx(15.0, abs=1e-9)
        assert report.ch is None  # single cluster
        assert report.db is None
        assert report.gamma_used == (0.5,)
        d = report.to_dict()
        assert d["discipline"] == "RN"
        assert d["ch"] is None
