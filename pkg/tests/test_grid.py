import numpy as np
import pytest

from fbmflow import GridError, TimeGrid


def test_nodes_endpoints_and_step():
    grid = TimeGrid(2.0, 8)
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == 2.0
    assert len(grid.nodes) == 9
    assert grid.step == 0.25
    assert np.allclose(np.diff(grid.nodes), grid.step)


def test_nodes_are_read_only():
    grid = TimeGrid(1.0, 4)
    with pytest.raises(ValueError):
        grid.nodes[0] = 1.0


@pytest.mark.parametrize("steps", [0, 1, -3, 2.5, "8"])
def test_rejects_bad_steps(steps):
    with pytest.raises(GridError):
        TimeGrid(1.0, steps)


@pytest.mark.parametrize("horizon", [0.0, -1.0, float("inf"), float("nan")])
def test_rejects_bad_horizon(horizon):
    with pytest.raises(GridError):
        TimeGrid(horizon, 4)


def test_refined_grid_shares_nodes():
    grid = TimeGrid(1.0, 10)
    fine = grid.refined(4)
    assert fine.steps == 40
    assert np.allclose(fine.nodes[::4], grid.nodes, atol=1e-15)
    with pytest.raises(GridError):
        grid.refined(0)


def test_window_slice_picks_inclusive_nodes():
    grid = TimeGrid(1.0, 10)
    sl = grid.window_slice(0.2, 0.5)
    assert np.allclose(grid.nodes[sl], [0.2, 0.3, 0.4, 0.5])
    # roundoff at the boundary must not drop a node
    sl = grid.window_slice(0.2 + 1e-13, 0.5 - 1e-13)
    assert np.allclose(grid.nodes[sl], [0.2, 0.3, 0.4, 0.5])


def test_window_slice_rejects_empty_and_thin_windows():
    grid = TimeGrid(1.0, 10)
    with pytest.raises(GridError):
        grid.window_slice(0.5, 0.2)
    with pytest.raises(GridError):
        grid.window_slice(0.41, 0.49)


def test_grids_compare_by_value():
    assert TimeGrid(1.0, 8) == TimeGrid(1.0, 8)
    assert TimeGrid(1.0, 8) != TimeGrid(2.0, 8)
