import numpy as np
import pytest

from valdesign.designs import (
    DesignSpec,
    ETS_PC1,
    ETS_VAR,
    SRS,
    design_ets,
    design_ets_pc1,
    design_srs,
    design_spec_from_dict,
    design_spec_to_dict,
    select_validation,
)
from valdesign.errors import (
    MissingDesignArtifact,
    NonFiniteValue,
    SizeExceedsPopulation,
)
from valdesign.randvar import derive_stream, mvn_sample


class TestDesignSrs:
    def test_full_population(self):
        selection = design_srs(derive_stream(1, 1), 20, 20)
        assert np.array_equal(selection.selected_indices, np.arange(20))
        assert selection.indicator.sum() == 20

    def test_selection_frequencies_uniform(self):
        # pointwise 4*SE bound applied to all 1e4 indices; the max over that
        # many binomials sits near 3.9*SE, so the seed is pinned
        n_total, n_validate, reps = 10**4, 10**3, 500
        counts = np.zeros(n_total)
        for rep in range(reps):
            selection = design_srs(derive_stream(99, rep), n_total, n_validate)
            counts[selection.selected_indices] += 1
        freq = counts / reps
        se = np.sqrt(0.1 * 0.9 / reps)
        assert np.abs(freq - 0.1).max() < 4 * se
        assert freq.mean() == pytest.approx(0.1)

    def test_zero_budget_forbidden(self):
        with pytest.raises(SizeExceedsPopulation):
            design_srs(derive_stream(0, 0), 10, 0)

    def test_oversized_budget(self):
        with pytest.raises(SizeExceedsPopulation):
            design_srs(derive_stream(0, 0), 10, 11)

    def test_exact_count(self):
        for n in (1, 7, 99):
            selection = design_srs(derive_stream(5, n), 100, n)
            assert selection.indicator.sum() == n
            assert len(set(selection.selected_indices.tolist())) == n


class TestDesignEts:
    def test_even_budget(self):
        values = np.arange(1.0, 11.0)
        selection = design_ets(values, 4)
        assert np.array_equal(selection.selected_indices, [0, 1, 8, 9])

    def test_odd_budget_favors_upper_tail(self):
        values = np.arange(1.0, 11.0)
        selection = design_ets(values, 5)
        assert np.array_equal(selection.selected_indices, [0, 1, 7, 8, 9])

    def test_all_equal_index_tiebreak(self):
        selection = design_ets(np.zeros(10), 4)
        assert np.array_equal(selection.selected_indices, [0, 1, 8, 9])

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        values = rng.normal(size=50)
        first = design_ets(values, 11)
        second = design_ets(values, 11)
        assert np.array_equal(first.selected_indices, second.selected_indices)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(44)
        values = rng.normal(size=60)
        base = design_ets(values, 14)
        warped = design_ets(np.exp(values), 14)
        assert np.array_equal(base.selected_indices, warped.selected_indices)

    def test_budget_equals_population(self):
        selection = design_ets(np.arange(6.0), 6)
        assert np.array_equal(selection.selected_indices, np.arange(6))

    def test_nonfinite_rejected(self):
        with pytest.raises(NonFiniteValue):
            design_ets([1.0, np.nan, 3.0], 2)


class TestDesignEtsPc1:
    def test_single_column_matches_plain_ets(self):
        rng = np.random.default_rng(10)
        column = rng.normal(size=40).reshape(-1, 1)
        plain = design_ets(column[:, 0], 10)
        viapca, spec = design_ets_pc1(column, 10)
        assert np.array_equal(plain.selected_indices, viapca.selected_indices)
        assert spec.pca_model is not None and spec.pc1_scores is not None

    def test_negation_invariance_even_budget(self):
        x = mvn_sample(derive_stream(2, 2), np.zeros(3), np.eye(3) * 1.0 + 0.4 * (1 - np.eye(3)), 50)
        base, _ = design_ets_pc1(x, 12)
        flipped, _ = design_ets_pc1(-x, 12)
        assert np.array_equal(base.selected_indices, flipped.selected_indices)

    def test_shared_factor_drives_selection(self):
        # two copies of a common factor plus a weak noise column: PC1 is the factor
        rng = np.random.default_rng(123)
        factor = np.arange(30.0)
        rng.shuffle(factor)
        noise = np.sin(7.0 * np.arange(30.0)) * 1e-3
        x = np.column_stack([factor, factor, noise])
        viapca, _ = design_ets_pc1(x, 8)
        direct = design_ets(factor, 8)
        assert np.array_equal(viapca.selected_indices, direct.selected_indices)


class TestSelectValidation:
    def make_xstar(self, n=30, p=4):
        return mvn_sample(derive_stream(7, 7), np.zeros(p), np.eye(p), n)

    def test_every_design_hits_budget(self):
        xstar = self.make_xstar()
        for kind in (SRS, ETS_VAR, ETS_PC1):
            selection, spec = select_validation(
                derive_stream(1, 0), xstar, kind, 10, target_variable=2
            )
            assert selection.indicator.sum() == 10
            assert spec.kind == kind

    def test_ets_var_requires_target(self):
        with pytest.raises(MissingDesignArtifact):
            select_validation(None, self.make_xstar(), ETS_VAR, 10)

    def test_ets_var_selects_on_named_column(self):
        xstar = self.make_xstar()
        selection, _ = select_validation(None, xstar, ETS_VAR, 10, target_variable=3)
        direct = design_ets(xstar[:, 2], 10)
        assert np.array_equal(selection.selected_indices, direct.selected_indices)

    def test_spec_round_trip(self):
        xstar = self.make_xstar()
        _, spec = select_validation(None, xstar, ETS_PC1, 10)
        clone = design_spec_from_dict(design_spec_to_dict(spec))
        assert clone.kind == spec.kind
        assert np.allclose(clone.pc1_scores, spec.pc1_scores)
        assert np.allclose(clone.pca_model.loadings, spec.pca_model.loadings)

    def test_spec_requires_target_for_ets_var(self):
        with pytest.raises(MissingDesignArtifact):
            DesignSpec(kind=ETS_VAR, n_validate=5)
