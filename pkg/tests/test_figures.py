from valdesign.figures import render_efficiency_figure, render_study_figure
from valdesign.randvar import substream
from valdesign.sim_engine import SimConfig, run_replicates, summarize_efficiency
from valdesign.study_pipeline import inject_error, load_table, run_design_comparison
from valdesign.surrogate import bundled_surrogate_path, surrogate_schema

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_efficiency_figure_renders(tmp_path):
    config = SimConfig(n_validate=60, sigma_u=1.0, seed=3, n_total=300, replicates=4)
    cells = summarize_efficiency(run_replicates(config))
    path = tmp_path / "eff.png"
    render_efficiency_figure([("demo setting", cells)], path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_study_figure_renders(tmp_path):
    table = load_table(bundled_surrogate_path(), surrogate_schema()).table
    rng = substream(1, "study")
    noisy = inject_error(rng.substream("inject"), table, var_fraction=0.25)
    report = run_design_comparison(rng, noisy, n_validate=200, m_imputations=3)
    path = tmp_path / "study.png"
    render_study_figure(report, path)
    assert path.read_bytes()[:8] == PNG_MAGIC


def test_rendering_deterministic(tmp_path):
    config = SimConfig(n_validate=60, sigma_u=1.0, seed=3, n_total=300, replicates=4)
    cells = summarize_efficiency(run_replicates(config))
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    render_efficiency_figure([("demo", cells)], a)
    render_efficiency_figure([("demo", cells)], b)
    assert a.read_bytes() == b.read_bytes()
