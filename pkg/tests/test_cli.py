"""
Tests for the command-line dispatcher
"""

import importlib
import json
import logging

import numpy as np
import pandas as pd
import pytest

from src.benchmarks import BENCH_COLUMNS
from src.cli import dispatch, manifest_path
from src.cli.io import (
    INDEX_COLUMNS,
    KNN_COLUMNS,
    METRICS_COLUMNS,
    NEIGHBOR_COLUMNS,
    SVGD_COLUMNS,
    VALIDATE_COLUMNS,
    read_labeled,
    read_points,
    read_trajectory,
    read_vectors,
)
from src.core import InputError, InvariantViolationError
from src.octree import AdmissibilityReport, FlatPointSet, PropertyCheckResult, brute_pairs
from src.version import VERSION

cli_main = importlib.import_module('src.cli.main')

TIMING_COLUMNS = {'build_s', 'update_s', 'nb_s', 'peak_mem_mb', 'avg_mem_mb', 'wall_ms', 'update_ms', 'query_ms'}


@pytest.fixture(autouse=True)
def isolated(monkeypatch, tmp_path):
    """No DYNOCT_* variables, run inside tmp_path, root logging restored afterwards"""
    import os
    for key in list(os.environ):
        if key.startswith("DYNOCT_"):
            monkeypatch.delenv(key)
    monkeypatch.chdir(tmp_path)
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def write_points(path, coords, ids=None):
    ids = list(range(len(coords))) if ids is None else ids
    frame = pd.DataFrame(np.asarray(coords), columns=['x', 'y', 'z'])
    frame.insert(0, 'id', ids)
    frame.to_csv(path, index=False)
    return path


def non_timing(path):
    frame = pd.read_csv(path)
    return frame.drop(columns=[c for c in frame.columns if c in TIMING_COLUMNS])


@pytest.mark.unit
@pytest.mark.cli
class TestUsage:
    """Test suite for argument handling and exit codes"""

    def test_no_arguments(self, capsys):
        assert dispatch([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_help(self, capsys):
        assert dispatch(['--help']) == 0
        assert "bench" in capsys.readouterr().out

    def test_version(self, capsys):
        assert dispatch(['--version']) == 0
        assert capsys.readouterr().out.startswith(f"dynoct {VERSION}")

    def test_subcommand_help(self, capsys):
        assert dispatch(['bench', '--help']) == 0
        assert "--dist" in capsys.readouterr().out

    def test_unknown_subcommand(self, capsys):
        assert dispatch(['zorder']) == 1
        err = capsys.readouterr().err
        assert "usage" in err and "error" in err

    @pytest.mark.parametrize("argv", [
        ['bench', '--scale', '-1'],
        ['bench', '--cutoff', 'wide'],
        ['bench', '--dist', 'zipf'],
        ['svgd', '--n', 'many'],
        ['neighbors', '--points', 'p.csv'],
        ['index', '--multiplier', '0'],
    ])
    def test_bad_flags(self, argv):
        assert dispatch(argv) == 1

    def test_missing_input_file(self, capsys):
        assert dispatch(['neighbors', '--points', 'nowhere.csv', '--cutoff', '1']) == 1
        assert "nowhere.csv" in capsys.readouterr().err

    def test_invalid_octree_config(self, tmp_path):
        (tmp_path / "octree.json").write_text(json.dumps({'K': 0, 'alpha': 2.0}))
        write_points(tmp_path / "p.csv", np.zeros((2, 3)))
        assert dispatch(['neighbors', '--points', 'p.csv', '--cutoff', '1', '--octree-config', 'octree.json']) == 1

    def test_internal_failure_exit_code(self, monkeypatch):
        def broken(*args, **kwargs):
            raise InvariantViolationError("leaf over capacity", violations=['leaf 3'])
        monkeypatch.setattr(cli_main, 'run_bench', broken)
        assert dispatch(['bench', '--dist', 'stepwise', '--scale', '0.001', '--steps', '1']) == 2


@pytest.mark.unit
@pytest.mark.cli
class TestReaders:
    """Test suite for CSV input codecs"""

    def test_points(self, tmp_path):
        write_points(tmp_path / "p.csv", [[0, 0, 0], [1, 2, 3]], ids=[5, 9])
        assert read_points(tmp_path / "p.csv") == [(5, (0.0, 0.0, 0.0)), (9, (1.0, 2.0, 3.0))]

    @pytest.mark.parametrize("text", [
        "id,y,x,z\n0,1,2,3\n",
        "id,x,y,z\n0,1,,3\n",
        "id,x,y,z\n0,1,a,3\n",
        "id,x,y,z\n0,1,2,3\n0,4,5,6\n",
        "id,x,y,z\n-1,1,2,3\n",
        "id,x,y,z\n0.5,1,2,3\n",
        "",
    ])
    def test_points_rejected(self, tmp_path, text):
        (tmp_path / "p.csv").write_text(text)
        with pytest.raises(InputError):
            read_points(tmp_path / "p.csv")

    def test_labeled(self, tmp_path):
        (tmp_path / "l.csv").write_text("id,x,y,z,label\n0,0,0,0,1\n1,1,1,1,0\n")
        points = read_labeled(tmp_path / "l.csv")
        assert [(p.id, p.label) for p in points] == [(0, 1), (1, 0)]

    def test_vectors(self, tmp_path):
        (tmp_path / "v.csv").write_text("id,v0,v1\n3,0.5,1.5\n4,2,3\n")
        ids, matrix = read_vectors(tmp_path / "v.csv")
        assert ids == [3, 4] and matrix.shape == (2, 2)
        with pytest.raises(InputError):
            read_vectors(tmp_path / "v.csv", dim=3)

    def test_trajectory_sorted_by_t(self, tmp_path):
        (tmp_path / "t.csv").write_text("point_id,t,x,y,z\n0,2,2,0,0\n0,0,0,0,0\n0,1,1,0,0\n"
                                        "1,0,5,5,5\n1,1,5,5,5\n1,2,5,5,5\n")
        traj = read_trajectory(tmp_path / "t.csv")
        assert traj.ids == [0, 1]
        np.testing.assert_array_equal(traj.samples[0, :, 0], [0.0, 1.0, 2.0])

    def test_trajectory_ragged(self, tmp_path):
        (tmp_path / "t.csv").write_text("point_id,t,x,y,z\n0,0,0,0,0\n0,1,1,0,0\n1,0,5,5,5\n")
        with pytest.raises(InputError):
            read_trajectory(tmp_path / "t.csv")


@pytest.mark.integration
@pytest.mark.cli
class TestSubcommands:
    """End-to-end runs of each subcommand on small inputs"""

    BENCH = ['bench', '--dist', 'stepwise', '--scale', '0.001', '--K', '10', '--K', '1000', '--alpha', '2',
             '--cutoff', '2', '--seed', '7', '--steps', '3']

    def test_bench_two_rows_per_step(self, tmp_path):
        assert dispatch(self.BENCH + ['--out', 'out.csv']) == 0
        frame = pd.read_csv(tmp_path / "out.csv")
        assert list(frame.columns) == BENCH_COLUMNS
        assert len(frame) == 6
        assert frame.groupby('step').size().tolist() == [2, 2, 2]
        assert set(frame['structure']) == {"octree(K=10,alpha=2)", "octree(K=1000,alpha=2)"}

    def test_bench_manifest(self, tmp_path):
        assert dispatch(self.BENCH + ['--out', 'out.csv']) == 0
        manifest = json.loads(manifest_path(tmp_path / "out.csv").read_text())
        assert manifest['subcommand'] == 'bench'
        assert manifest['seed'] == 7
        assert manifest['flags']['K'] == [10, 1000]
        assert manifest['outputs'] == ['out.csv']
        assert manifest['finished_at'] >= manifest['started_at']

    def test_bench_deterministic(self, tmp_path):
        assert dispatch(self.BENCH + ['--flat', '--out', 'a.csv']) == 0
        assert dispatch(self.BENCH + ['--flat', '--out', 'b.csv']) == 0
        pd.testing.assert_frame_equal(non_timing(tmp_path / "a.csv"), non_timing(tmp_path / "b.csv"))
        assert len(pd.read_csv(tmp_path / "a.csv")) == 9

    def test_stdout_output_without_manifest(self, tmp_path, capsys):
        assert dispatch(['bench', '--dist', 'wave', '--wave-points', '50', '--steps', '2', '--K', '4',
                         '--cutoff', '10']) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == ','.join(BENCH_COLUMNS)
        assert len(out.splitlines()) == 3
        assert not list(tmp_path.glob("*.manifest.json"))

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("DYNOCT_SEED", "11")
        assert dispatch(['svgd', '--n', '10', '--iters', '1', '--out', 's.csv']) == 0
        assert json.loads(manifest_path(tmp_path / "s.csv").read_text())['seed'] == 11

    def test_svgd(self, tmp_path):
        argv = ['svgd', '--n', '20', '--iters', '3', '--mode', 'octree', '--target', 'mixture2', '--seed', '1',
                '--eps', '0.05', '--bandwidth', 'median']
        assert dispatch(argv + ['--out', 'a.csv']) == 0
        assert dispatch(argv + ['--out', 'b.csv']) == 0
        frame = pd.read_csv(tmp_path / "a.csv")
        assert list(frame.columns) == SVGD_COLUMNS
        assert frame['iter'].tolist() == [0, 1, 2, 3]
        pd.testing.assert_frame_equal(non_timing(tmp_path / "a.csv"), non_timing(tmp_path / "b.csv"))

    def test_svgd_modes_agree_with_compat_norm(self, tmp_path):
        common = ['svgd', '--n', '15', '--iters', '2', '--seed', '3', '--bandwidth', '100', '--compat-norm']
        assert dispatch(common + ['--mode', 'naive', '--out', 'n.csv']) == 0
        assert dispatch(common + ['--mode', 'octree', '--out', 'o.csv']) == 0
        naive = pd.read_csv(tmp_path / "n.csv")['mean_logp'].to_numpy()
        octree = pd.read_csv(tmp_path / "o.csv")['mean_logp'].to_numpy()
        np.testing.assert_allclose(naive, octree, atol=1e-10)

    def test_knn_synthetic(self, tmp_path):
        assert dispatch(['knn', '--n-train', '200', '--n-test', '30', '--batch-size', '100', '--k', '3',
                         '--seed', '2', '--out', 'k.csv']) == 0
        frame = pd.read_csv(tmp_path / "k.csv")
        assert list(frame.columns) == KNN_COLUMNS
        assert frame['batch_index'].tolist() == [0, 1]
        assert frame['accuracy'].between(0.0, 1.0).all()

    def test_knn_files(self, tmp_path):
        (tmp_path / "train.csv").write_text("id,x,y,z,label\n0,0,0,0,0\n1,0.1,0,0,0\n2,5,5,5,1\n3,5.1,5,5,1\n")
        (tmp_path / "test.csv").write_text("id,x,y,z,label\n10,0.05,0,0,0\n11,5,5.1,5,1\n")
        assert dispatch(['knn', '--train', 'train.csv', '--test', 'test.csv', '--k', '1', '--batch-size', '2',
                         '--out', 'k.csv']) == 0
        assert pd.read_csv(tmp_path / "k.csv")['accuracy'].tolist() == [0.5, 1.0]

    def test_knn_needs_both_files(self, tmp_path):
        (tmp_path / "train.csv").write_text("id,x,y,z,label\n0,0,0,0,0\n")
        assert dispatch(['knn', '--train', 'train.csv']) == 1

    def test_index_exhaustive_recall(self, tmp_path, capsys):
        assert dispatch(['index', '--n', '300', '--dim', '8', '--num-queries', '5', '--clusters', '3',
                         '--probe', '3', '--multiplier', 'all', '--topk', '5', '--seed', '4',
                         '--out', 'i.csv']) == 0
        assert "recall@5=1.0000" in capsys.readouterr().err
        frame = pd.read_csv(tmp_path / "i.csv")
        assert list(frame.columns) == INDEX_COLUMNS
        assert len(frame) == 25
        assert frame.groupby('query_id')['rank'].apply(list).tolist() == [[1, 2, 3, 4, 5]] * 5

    def test_index_from_files(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        vectors = pd.DataFrame(rng.normal(size=(60, 4)), columns=[f"v{i}" for i in range(4)])
        vectors.insert(0, 'id', range(100, 160))
        vectors.to_csv(tmp_path / "v.csv", index=False)
        assert dispatch(['index', '--vectors', 'v.csv', '--clusters', '2', '--probe', '2', '--multiplier', 'all',
                         '--topk', '3', '--num-queries', '4', '--out', 'i.csv']) == 0
        frame = pd.read_csv(tmp_path / "i.csv")
        # stored vectors used as queries find themselves first
        assert frame[frame['rank'] == 1]['result_id'].tolist() == [100, 101, 102, 103]
        assert "recall@3=1.0000" in capsys.readouterr().err

    def test_metrics(self, tmp_path):
        rng = np.random.default_rng(5)
        X = rng.random((40, 3))
        order = rng.permutation(40)
        write_points(tmp_path / "x.csv", X)
        # same ids in a different row order
        write_points(tmp_path / "z.csv", 2.0 * X[order], ids=order.tolist())
        lines = ["point_id,t,x,y,z"] + [f"{i},{t},{t * 0.5},{i},0" for i in range(3) for t in range(4)]
        (tmp_path / "t.csv").write_text("\n".join(lines) + "\n")

        assert dispatch(['metrics', '--x', 'x.csv', '--z', 'z.csv', '--k', '4', '--traj', 't.csv',
                         '--out', 'm.csv', '--cells-out', 'cells.csv']) == 0
        frame = pd.read_csv(tmp_path / "m.csv")
        assert list(frame.columns) == METRICS_COLUMNS
        points = frame[frame['scope'] == 'point']
        np.testing.assert_allclose(points[points['metric'] == 'distortion']['value'], 2.0, rtol=1e-12)
        assert (points[points['metric'] == 'jaccard']['value'] == 1.0).all()
        np.testing.assert_allclose(points[points['metric'] == 'curvature']['value'], 0.0, atol=1e-12)
        summary = frame[frame['scope'] == 'summary'].set_index('metric')['value']
        assert summary['jaccard_mean'] == 1.0
        cells = pd.read_csv(tmp_path / "cells.csv")
        assert cells['count'].sum() == 40
        np.testing.assert_allclose(cells['mean_distortion'], 2.0, rtol=1e-12)

    def test_metrics_mismatched_ids(self, tmp_path):
        write_points(tmp_path / "x.csv", np.random.default_rng(0).random((12, 3)))
        write_points(tmp_path / "z.csv", np.random.default_rng(1).random((12, 3)), ids=list(range(1, 13)))
        assert dispatch(['metrics', '--x', 'x.csv', '--z', 'z.csv', '--k', '3']) == 1

    def test_metrics_needs_input(self):
        assert dispatch(['metrics']) == 1

    def test_neighbors_match_oracle(self, tmp_path):
        coords = np.random.default_rng(8).random((150, 3))
        write_points(tmp_path / "p.csv", coords)
        assert dispatch(['neighbors', '--points', 'p.csv', '--cutoff', '0.15', '--out', 'nb.csv']) == 0
        frame = pd.read_csv(tmp_path / "nb.csv")
        assert list(frame.columns) == NEIGHBOR_COLUMNS
        expected = brute_pairs(FlatPointSet.from_arrays(range(150), coords), 0.15)
        rows = list(expected.to_rows())
        assert list(zip(frame["id"], frame["neighbor_id"])) == [(i, j) for i, j, _ in rows]
        np.testing.assert_allclose(frame["distance"], [dist for _, _, dist in rows], rtol=1e-15)

    def test_neighbors_empty_file(self, tmp_path):
        (tmp_path / "p.csv").write_text("id,x,y,z\n")
        assert dispatch(['neighbors', '--points', 'p.csv', '--cutoff', '1', '--out', 'nb.csv']) == 0
        assert pd.read_csv(tmp_path / "nb.csv").empty

    def test_validate_passes(self, tmp_path, capsys):
        assert dispatch(['validate', '--ops', '400', '--K', '4', '--alpha', '1', '--alpha', '2',
                         '--queries', '5', '--out', 'v.csv']) == 0
        frame = pd.read_csv(tmp_path / "v.csv")
        assert list(frame.columns) == VALIDATE_COLUMNS
        assert frame['status'].tolist() == ['pass', 'pass']
        assert "2/2 settings passed" in capsys.readouterr().err

    def test_validate_failure_exit_code(self, monkeypatch, tmp_path, capsys):
        def failing(config, ops, seed=0, queries=50):
            return PropertyCheckResult(config.K, config.alpha, ops, 10, AdmissibilityReport(violations=['leaf 1']),
                                       0, 0.0)
        monkeypatch.setattr(cli_main, 'check_setting', failing)
        assert dispatch(['validate', '--ops', '10', '--K', '4', '--alpha', '2', '--out', 'v.csv']) == 2
        assert pd.read_csv(tmp_path / 'v.csv')['status'].tolist() == ['fail']
        err = capsys.readouterr().err
        assert '0/1 settings passed' in err
        assert 'error: 1 of 1 settings failed validation' in err
