import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fyvi import bench
from fyvi.simplex import Regularizer

FAST = bench.BenchmarkSpec(max_iter=15)


class TestGenerate:
    def test_default_shape_and_labels(self):
        data = bench.generate(bench.BenchmarkSpec())
        assert data.x.shape == (1100, 2)
        assert np.sum(data.labels == -1) == 100
        assert all(np.sum(data.labels == k) == 250 for k in range(4))

    def test_component_means(self):
        spec = bench.BenchmarkSpec(seed=3)
        data = bench.generate(spec)
        for k, (mean, scale) in enumerate(zip(spec.means, spec.scales)):
            pts = data.x[data.labels == k]
            se = np.sqrt(scale / len(pts))
            assert np.all(np.abs(pts.mean(axis=0) - mean) <= 3 * se)
            assert np.all(np.abs(pts.var(axis=0) / scale - 1) < 0.3)

    def test_outliers_in_box(self):
        data = bench.generate(bench.BenchmarkSpec(seed=1))
        assert np.all(np.abs(data.x[data.labels == -1]) <= 3)

    def test_deterministic(self):
        a = bench.generate(bench.BenchmarkSpec(seed=5))
        b = bench.generate(bench.BenchmarkSpec(seed=5))
        np.testing.assert_array_equal(a.x, b.x)
        assert not np.array_equal(a.x, bench.generate(bench.BenchmarkSpec(seed=6)).x)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            bench.BenchmarkSpec(scales=(0.1, 0.0, 0.3, 0.4))


class TestRuns:
    def test_table1_csv(self, tmp_path):
        reports = bench.run_table1([0, 1], base=FAST)
        assert set(reports) == {"standard", "sparse", "hard"}
        path = tmp_path / "t.csv"
        bench.write_csv(reports, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "method,rho,seed,ami,ari,silhouette,sparsity,final_fyvfe,iters"
        assert len(lines) == 7
        assert lines[1].startswith("standard,1.0,0,")
        assert any(line.startswith("hard,zero,1,") for line in lines)

    def test_bit_identical_reruns(self):
        a = bench.reports_csv(bench.run_table1([2], base=FAST))
        b = bench.reports_csv(bench.run_table1([2], base=FAST))
        assert a == b

    def test_parallel_matches_serial(self):
        methods = {"sparse": Regularizer(2.0)}
        a = bench.reports_csv(bench.run_table1([0, 1], methods, base=FAST))
        b = bench.reports_csv(bench.run_table1([0, 1], methods, base=FAST, workers=2))
        assert a == b

    def test_report_bounds(self):
        reports = bench.run_table1([0], base=FAST)
        for rep in reports.values():
            assert rep.mean("ami") <= 1 and rep.mean("ari") <= 1
            assert 0 <= rep.mean("sparsity") <= 3
            assert -1 <= rep.mean("silhouette") <= 1
        assert reports["standard"].mean("sparsity") == 0
        assert reports["hard"].mean("sparsity") == 3

    def test_sweep_and_plots(self, tmp_path):
        rhos = (1.0, 2.0)
        reports = bench.run_rho_sweep([0], rhos, base=FAST)
        assert set(reports) == {"rho=1", "rho=2"}
        paths = bench.write_sweep_plots(reports, rhos, tmp_path)
        assert sorted(p.name for p in paths) == ["sweep_ami.svg", "sweep_ari.svg", "sweep_silhouette.svg",
                                                 "sweep_sparsity.svg"]
        root = ET.parse(paths[0]).getroot()
        assert root.tag.endswith("svg")
        assert any(el.tag.endswith("polygon") for el in root.iter())

    def test_validation(self):
        with pytest.raises(ValueError):
            bench.run_table1([])
        with pytest.raises(ValueError):
            bench.run_rho_sweep([0], (0.0, 1.0))
