import hashlib
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from figrender.cli import main
from figrender.render import (
    FIGURE_KINDS,
    FigureSpec,
    SchemaMismatch,
    digest_array,
    discover_specs,
    parse_columns,
    render,
)


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


@pytest.fixture()
def fake_run(tmp_path):
    """Schema-conformant run directory with tiny synthetic contents."""
    run = tmp_path / "run"
    run.mkdir()
    sigmas = (0.0, 0.7)
    write_csv(
        run / "gap_curve.csv",
        ["sigma_mis", "seed_count", "symkl_mean", "symkl_std", "symkl_stderr"],
        [(s, 3, 0.1 + 2.0 * s, 0.05, 0.03) for s in sigmas],
    )
    nbins = 12
    centers = -math.pi + (np.arange(nbins) + 0.5) * 2 * math.pi / nbins
    for s in sigmas:
        d1 = np.exp(np.cos(centers))
        d1 /= d1.sum() * (2 * math.pi / nbins)
        d2 = np.exp(np.cos(centers - s))
        d2 /= d2.sum() * (2 * math.pi / nbins)
        write_csv(
            run / f"marginals_{s:g}.csv",
            ["bin_center", "density_mod1", "density_mod2"],
            list(zip(centers, d1, d2)),
        )
        counts = np.random.default_rng(int(10 * s)).integers(
            0, 9, size=(nbins, nbins)
        )
        write_csv(
            run / f"joint_{s:g}.csv",
            ["bin_a1", "bin_a2", "count"],
            [
                (centers[i], centers[j], counts[i, j])
                for i in range(nbins)
                for j in range(nbins)
            ],
        )
        write_csv(
            run / f"delta_{s:g}.csv",
            ["bin_center", "density"],
            list(zip(centers, d1)),
        )
    taus = (10.0, 0.1)
    write_csv(
        run / "concentration.csv",
        [
            "tau",
            "capmass_trained_mean", "capmass_trained_std",
            "capmass_gibbs_mean", "capmass_gibbs_std",
        ],
        [(t, 0.5, 0.02, 0.48, 0.01) for t in taus],
    )
    rng = np.random.default_rng(0)
    for t in taus:
        for kind in ("gibbs", "trained"):
            pts = rng.standard_normal((20, 3))
            pts /= np.linalg.norm(pts, axis=1, keepdims=True)
            write_csv(run / f"cloud_{t:g}_{kind}.csv", ["x", "y", "z"], pts)
    write_csv(
        run / "grad_consistency.csv",
        [
            "regime", "N",
            "align_mean", "align_std", "align_stderr",
            "relerr_mean", "relerr_std", "relerr_stderr",
        ],
        [],
    )
    # grad_consistency has a string column; write it by hand.
    with open(run / "grad_consistency.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            "regime,N,align_mean,align_std,align_stderr,"
            "relerr_mean,relerr_std,relerr_stderr\n"
        )
        for regime in ("cosine", "rbf"):
            for k, n in enumerate((4, 16, 64)):
                fh.write(
                    f"{regime},{n},{0.5 + 0.1 * k},0.05,0.02,{1.0 - 0.2 * k},0.1,0.04\n"
                )
    return run


class TestRenderAllKinds:
    def test_every_kind_renders(self, fake_run, tmp_path):
        out = tmp_path / "figs"
        out.mkdir()
        specs = discover_specs(str(fake_run), str(out), FIGURE_KINDS)
        assert sorted(s.kind for s in specs) == sorted(FIGURE_KINDS)
        for spec in specs:
            result = render(spec)
            assert os.path.exists(result.path)
            assert os.path.getsize(result.path) > 0
            assert result.data_digests

    def test_digests_match_parsed_csv(self, fake_run, tmp_path):
        out = tmp_path / "figs"
        out.mkdir()
        spec = discover_specs(str(fake_run), str(out), ["gap_curve"])[0]
        result = render(spec)
        cols = parse_columns(str(fake_run / "gap_curve.csv"))
        assert result.data_digests["sigma_mis"] == digest_array(cols["sigma_mis"])
        assert result.data_digests["symkl_mean"] == digest_array(cols["symkl_mean"])
        assert result.data_digests["band"] == digest_array(cols["symkl_stderr"])

    def test_band_choice_switches_column(self, fake_run, tmp_path):
        out = tmp_path / "figs"
        out.mkdir()
        spec = FigureSpec(
            kind="gap_curve",
            inputs=(str(fake_run / "gap_curve.csv"),),
            output=str(out / "gap_std.svg"),
            band="std",
        )
        result = render(spec)
        cols = parse_columns(str(fake_run / "gap_curve.csv"))
        assert result.data_digests["band"] == digest_array(cols["symkl_std"])

    def test_polar_digests_cover_all_inputs(self, fake_run, tmp_path):
        out = tmp_path / "figs"
        out.mkdir()
        spec = discover_specs(str(fake_run), str(out), ["polar_grid"])[0]
        result = render(spec)
        cols = parse_columns(str(fake_run / "marginals_0.7.csv"))
        assert result.data_digests["0.7:density_mod2"] == digest_array(
            cols["density_mod2"]
        )

    def test_schema_mismatch_names_column(self, tmp_path):
        bad = tmp_path / "gap_curve.csv"
        write_csv(bad, ["sigma_mis", "wrong"], [(0.0, 1.0)])
        spec = FigureSpec(
            kind="gap_curve", inputs=(str(bad),),
            output=str(tmp_path / "x.svg"),
        )
        with pytest.raises(SchemaMismatch, match="symkl_mean"):
            render(spec)

    def test_missing_optional_series_is_fine(self, fake_run, tmp_path):
        # A lone Gibbs cloud (no trained partner) still renders.
        lonely = tmp_path / "lonely"
        lonely.mkdir()
        src = fake_run / "cloud_10_gibbs.csv"
        (lonely / "cloud_10_gibbs.csv").write_text(src.read_text())
        spec = FigureSpec(
            kind="sphere_overlay",
            inputs=(str(lonely / "cloud_10_gibbs.csv"),),
            output=str(tmp_path / "overlay.svg"),
        )
        result = render(spec)
        assert os.path.exists(result.path)


class TestCli:
    def test_all_figures(self, fake_run, tmp_path, capsys):
        out = tmp_path / "figs"
        code = main(["--in", str(fake_run), "--figures", "all", "--out", str(out)])
        assert code == 0
        made = sorted(p.name for p in out.iterdir())
        assert made == sorted(k + ".svg" for k in FIGURE_KINDS)

    def test_subset_and_band(self, fake_run, tmp_path):
        out = tmp_path / "figs"
        code = main(
            [
                "--in", str(fake_run), "--figures", "gap_curve,concentration",
                "--out", str(out), "--band", "std",
            ]
        )
        assert code == 0
        assert sorted(p.name for p in out.iterdir()) == [
            "concentration.svg", "gap_curve.svg",
        ]

    def test_unknown_kind_exit_two(self, fake_run, tmp_path):
        assert main(
            ["--in", str(fake_run), "--figures", "bogus", "--out", str(tmp_path / "o")]
        ) == 2

    def test_empty_run_dir_exit_two(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(
            ["--in", str(empty), "--figures", "all", "--out", str(tmp_path / "o")]
        ) == 2


class TestAgainstRealRun:
    def test_renders_a_real_tiny_run(self, tmp_path):
        """End to end through the primary CLI's file interface."""
        run = tmp_path / "run"
        cmd = [
            sys.executable, "-m", "contrastlab.cli", "mm-gap",
            "--out", str(run), "--seeds", "2",
            "--override", "steps=20", "--override", "batch=16",
            "--override", "n_eval=200", "--override", "sigmas=0.0,0.5",
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        out = tmp_path / "figs"
        code = main(["--in", str(run), "--figures", "all", "--out", str(out)])
        assert code == 0
        assert (out / "gap_curve.svg").exists()
        assert (out / "polar_grid.svg").exists()
