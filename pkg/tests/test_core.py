"""Grid geometry, parameter invariants, initial data and checkpoint I/O."""

import numpy as np
import pytest
from scipy.integrate import quad

from inlslab.core import (
    BoundaryDecayWarning,
    Field,
    Grid,
    InitialData,
    InvariantError,
    NonFiniteFieldError,
    ProblemParams,
    l2_norm,
    read_checkpoint,
    realize,
    sup_norm,
    write_checkpoint,
)


class TestProblemParams:
    def test_exponents_match_closed_forms(self):
        p = ProblemParams(2, 0.5)
        assert p.sigma == pytest.approx((4 - 2 * 0.5) / 2)
        assert p.p == pytest.approx(p.sigma + 2)
        assert p.energy_coefficient == pytest.approx(2 / (4 - 1 + 4))

    def test_mass_critical_scaling_exponent(self):
        # sigma = (4-2b)/N is exactly the power that makes the scaling
        # u -> lam^((2-b)/sigma) u(lam x) leave the L2 norm invariant
        for N in (1, 2, 3):
            for b in (0.3, 1.0, 1.7):
                sigma = ProblemParams(N, b).sigma
                assert 2.0 * (2.0 - b) / sigma - N == pytest.approx(0.0, abs=1e-13)

    @pytest.mark.parametrize("ndim,b", [(0, 0.5), (4, 0.5), (1, 0.0), (1, 2.0), (2, -1.0)])
    def test_rejects_bad_parameters(self, ndim, b):
        with pytest.raises(InvariantError):
            ProblemParams(ndim, b)


class TestGrid:
    def test_cell_centers_avoid_origin(self):
        g = Grid(1, 5.0, 64)
        x = g.axis_coords()
        assert np.min(np.abs(x)) == pytest.approx(g.h / 2)
        assert np.min(Grid(2, 5.0, 64).radii()) > 0

    def test_coords_cover_box_uniformly(self):
        g = Grid(1, 3.0, 10)
        x = g.axis_coords()
        assert x[0] == pytest.approx(-3.0 + g.h / 2)
        assert x[-1] == pytest.approx(3.0 - g.h / 2)
        assert np.allclose(np.diff(x), g.h)

    def test_volume_element(self):
        g = Grid(3, 2.0, 8)
        assert g.cell_volume * g.size == pytest.approx((2 * 2.0) ** 3)

    def test_index_coordinate_round_trip(self):
        g = Grid(2, 4.0, 16)
        for flat in (0, 5, 255, 100):
            pt = g.index_to_coord(flat)
            assert g.coord_to_index(pt) == flat

    @pytest.mark.parametrize("M", [0, -4, 7])
    def test_rejects_bad_point_counts(self, M):
        with pytest.raises(InvariantError):
            Grid(1, 1.0, M)


class TestField:
    def test_shape_mismatch_rejected(self):
        p = ProblemParams(1, 0.5)
        with pytest.raises(InvariantError):
            Field(p, Grid(1, 1.0, 8), np.zeros(4, dtype=complex))

    def test_non_finite_samples_rejected(self):
        p = ProblemParams(1, 0.5)
        vals = np.zeros(8, dtype=complex)
        vals[3] = np.nan
        with pytest.raises(NonFiniteFieldError):
            Field(p, Grid(1, 1.0, 8), vals)


class TestInitialData:
    def test_gaussian_l2_norm_against_quadrature(self):
        params = ProblemParams(1, 0.5)
        grid = Grid(1, 10.0, 512)
        init = InitialData(kind="gaussian", amplitude=0.7, width=0.9)
        f = realize(init, params, grid)
        exact = np.sqrt(quad(lambda x: 0.49 * np.exp(-x**2 / 0.81), -np.inf, np.inf)[0])
        assert l2_norm(f) == pytest.approx(exact, rel=1e-12)

    def test_shifted_gaussian_peaks_at_center(self):
        params = ProblemParams(1, 0.5)
        grid = Grid(1, 10.0, 256)
        f = realize(
            InitialData(kind="shifted_gaussian", amplitude=1.0, width=0.5, center=(1.5,)),
            params,
            grid,
        )
        peak_x = grid.axis_coords()[int(np.argmax(np.abs(f.values)))]
        assert abs(peak_x - 1.5) <= grid.h

    def test_sum_of_gaussians_superposes(self):
        params = ProblemParams(1, 0.5)
        grid = Grid(1, 10.0, 256)
        both = realize(
            InitialData(
                kind="sum_of_gaussians",
                amplitude=0.4,
                width=0.7,
                center=(-2.0,),
                amplitude2=0.3,
                width2=1.1,
                center2=(2.0,),
            ),
            params,
            grid,
        )
        one = realize(
            InitialData(kind="gaussian", amplitude=0.4, width=0.7, center=(-2.0,)), params, grid
        )
        two = realize(
            InitialData(kind="gaussian", amplitude=0.3, width=1.1, center=(2.0,)), params, grid
        )
        assert np.allclose(both.values, one.values + two.values)

    def test_warns_when_box_too_small(self):
        params = ProblemParams(1, 0.5)
        grid = Grid(1, 2.0, 64)
        with pytest.warns(BoundaryDecayWarning):
            realize(InitialData(kind="gaussian", amplitude=1.0, width=1.0), params, grid)

    def test_adequate_box_is_silent(self):
        params = ProblemParams(1, 0.5)
        grid = Grid(1, 12.0, 64)
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            realize(InitialData(kind="gaussian", amplitude=1.0, width=1.0), params, grid)

    def test_rejects_unknown_kind(self):
        with pytest.raises(InvariantError):
            InitialData(kind="ring")


class TestCheckpoints:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        params = ProblemParams(2, 1.25)
        grid = Grid(2, 3.0, 16)
        vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        f = Field(params, grid, vals)
        path = tmp_path / "state.bin"
        write_checkpoint(path, f, t=0.375, run_id="rt")
        g, meta = read_checkpoint(path)
        assert np.array_equal(g.values, f.values)
        assert g.params == params
        assert g.grid == grid
        assert meta["t"] == 0.375
        assert meta["run_id"] == "rt"

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\x00" * 64)
        with pytest.raises(InvariantError):
            read_checkpoint(str(path))

    def test_truncated_payload_rejected(self, tmp_path):
        params = ProblemParams(1, 0.5)
        grid = Grid(1, 1.0, 16)
        f = Field(params, grid, np.ones(16, dtype=complex))
        path = tmp_path / "cut.bin"
        write_checkpoint(path, f)
        data = path.read_bytes()
        path.write_bytes(data[:-24])
        with pytest.raises(InvariantError):
            read_checkpoint(str(path))

    def test_from_checkpoint_initial_data(self, tmp_path):
        params = ProblemParams(1, 0.5)
        grid = Grid(1, 8.0, 32)
        f = realize(InitialData(kind="gaussian", amplitude=0.5, width=1.0), params, grid)
        path = tmp_path / "seed.bin"
        write_checkpoint(path, f, t=0.0)
        g = realize(
            InitialData(kind="from_checkpoint", checkpoint_path=str(path)), params, grid
        )
        assert np.array_equal(g.values, f.values)

    def test_from_checkpoint_rejects_mismatched_grid(self, tmp_path):
        params = ProblemParams(1, 0.5)
        grid = Grid(1, 8.0, 32)
        f = realize(InitialData(kind="gaussian", amplitude=0.5, width=1.0), params, grid)
        path = tmp_path / "seed.bin"
        write_checkpoint(path, f)
        with pytest.raises(InvariantError):
            realize(
                InitialData(kind="from_checkpoint", checkpoint_path=str(path)),
                params,
                Grid(1, 8.0, 64),
            )


def test_sup_norm_matches_numpy():
    params = ProblemParams(1, 0.5)
    grid = Grid(1, 1.0, 8)
    vals = np.arange(8) * (0.3 + 0.4j)
    f = Field(params, grid, vals)
    assert sup_norm(f) == pytest.approx(np.max(np.abs(vals)))
