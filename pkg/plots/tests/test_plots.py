import time

import matplotlib.pyplot as plt
import numpy as np
import pytest

from plots.plot_preference_stairs import load_binned, render as render_stairs
from plots.plot_preference_stairs import main as stairs_main
from plots.plot_reward_curves import load_trace, render as render_curves
from plots.plot_reward_curves import main as curves_main
from plots.plot_sweep_bars import load_sweep, render as render_bars
from plots.plot_sweep_bars import main as bars_main


@pytest.fixture(autouse=True)
def close_figures():
    yield
    plt.close("all")


def binned_fixture(tmp_path, n_users=5, bins=10):
    lines = ["# fingerprint=deadbeef", "user,bin,a,r,p_action_only"]
    for u in range(n_users):
        for b in range(bins):
            p = 0.75 if (u == 0 and b == 3) else 0.5
            lines.append(f"{u},{b},1,1,{p}")
    path = tmp_path / "binned.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def trace_fixture(tmp_path, name, responses_by_round, n_users=2):
    lines = ["round,batch,user,phase,item,response,likable"]
    item = 0
    for t, resps in enumerate(responses_by_round, start=1):
        for u, r in enumerate(resps):
            lines.append(f"{t},1,{u},exploit,{item},{r},1")
            item += 1
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def sweep_fixture(tmp_path, rows):
    lines = ["delta_t,seed,acc_reward,reward_likable,status"] + rows
    path = tmp_path / "sweep.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


class TestPreferenceStairs:
    def test_five_users_render_five_step_series(self, tmp_path):
        fp, data = load_binned(binned_fixture(tmp_path))
        assert fp == "deadbeef"
        fig = render_stairs(data, list(range(5)), fp)
        assert len(fig.axes[0].lines) == 5
        labels = [line.get_label() for line in fig.axes[0].lines]
        assert labels == [f"user {u}" for u in range(5)]

    def test_plotted_value_at_bin_three(self, tmp_path):
        _, data = load_binned(binned_fixture(tmp_path))
        fig = render_stairs(data, [0])
        xs, ys = fig.axes[0].lines[0].get_data()
        assert ys[list(xs).index(3)] == 0.75

    def test_constant_user_is_flat(self, tmp_path):
        _, data = load_binned(binned_fixture(tmp_path))
        fig = render_stairs(data, [1])
        _, ys = fig.axes[0].lines[0].get_data()
        assert set(ys) == {0.5}

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("user,bin\n1,0\n")
        with pytest.raises(ValueError):
            load_binned(path)

    def test_empty_selection_rejected(self, tmp_path):
        _, data = load_binned(binned_fixture(tmp_path))
        with pytest.raises(ValueError):
            render_stairs(data, [])
        with pytest.raises(ValueError):
            render_stairs(data, [99])

    def test_main_writes_png_and_svg(self, tmp_path):
        t0 = time.monotonic()
        out = tmp_path / "stairs"
        assert stairs_main(["--in", str(binned_fixture(tmp_path)),
                            "--out", str(out), "--users", "0", "1"]) == 0
        assert (tmp_path / "stairs.png").stat().st_size > 0
        assert (tmp_path / "stairs.svg").stat().st_size > 0
        assert time.monotonic() - t0 < 10


class TestRewardCurves:
    def test_all_plus_trace_is_line_y_equals_t(self, tmp_path):
        path = trace_fixture(tmp_path, "t.csv", [(1, 1)] * 4)
        _, rounds, cum = load_trace(path)
        assert cum.tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_known_prefix_sums(self, tmp_path):
        path = trace_fixture(tmp_path, "t.csv", [(1, 1), (1, -1), (-1, -1)])
        _, _, cum = load_trace(path)
        assert cum.tolist() == [1.0, 1.0, 0.0]

    def test_identical_traces_identical_curves(self, tmp_path):
        a = trace_fixture(tmp_path, "a.csv", [(1, -1), (1, 1)])
        b = trace_fixture(tmp_path, "b.csv", [(1, -1), (1, 1)])
        _, ra, ca = load_trace(a)
        _, rb, cb = load_trace(b)
        fig = render_curves([(ra, ca), (rb, cb)], ["a", "b"])
        lines = fig.axes[0].lines
        assert np.array_equal(lines[0].get_ydata(), lines[1].get_ydata())

    def test_mismatched_horizons_warn_and_truncate(self, tmp_path):
        a = trace_fixture(tmp_path, "a.csv", [(1, 1)] * 4)
        b = trace_fixture(tmp_path, "b.csv", [(1, 1)] * 2)
        _, ra, ca = load_trace(a)
        _, rb, cb = load_trace(b)
        with pytest.warns(UserWarning):
            fig = render_curves([(ra, ca), (rb, cb)], ["a", "b"])
        assert all(len(line.get_xdata()) == 2 for line in fig.axes[0].lines)

    def test_label_count_mismatch(self, tmp_path):
        a = trace_fixture(tmp_path, "a.csv", [(1, 1)])
        _, ra, ca = load_trace(a)
        with pytest.raises(ValueError):
            render_curves([(ra, ca)], ["x", "y"])

    def test_main_writes_png_and_svg(self, tmp_path):
        t0 = time.monotonic()
        path = trace_fixture(tmp_path, "t.csv", [(1, 1), (-1, 1)])
        out = tmp_path / "curves"
        assert curves_main(["--in", str(path), "--out", str(out),
                            "--labels", "engine"]) == 0
        assert (tmp_path / "curves.png").stat().st_size > 0
        assert (tmp_path / "curves.svg").stat().st_size > 0
        assert time.monotonic() - t0 < 10


class TestSweepBars:
    def test_single_row_single_bar(self, tmp_path):
        path = sweep_fixture(tmp_path, ["100,0,5.0,1.0,ok"])
        _, agg = load_sweep(path)
        fig = render_bars(agg)
        assert len(fig.axes[0].patches) == 1
        assert fig.axes[0].patches[0].get_height() == 5.0

    def test_eleven_delta_t_rows_in_order(self, tmp_path):
        dts = [50 + 55 * k for k in range(11)]
        rows = [f"{dt},0,{float(i)},1.0,ok" for i, dt in enumerate(dts)]
        path = sweep_fixture(tmp_path, rows)
        _, agg = load_sweep(path)
        fig = render_bars(agg)
        assert len(fig.axes[0].patches) == 11
        labels = [t.get_text() for t in fig.axes[0].get_xticklabels()]
        assert labels == [str(dt) for dt in sorted(dts)]

    def test_bar_heights_equal_means(self, tmp_path):
        path = sweep_fixture(tmp_path, ["10,0,2.0,1.0,ok", "10,1,4.0,1.0,ok",
                                        "20,0,7.0,1.0,ok"])
        _, agg = load_sweep(path)
        assert agg == [(10, 3.0, pytest.approx(1.0), 2), (20, 7.0, 0.0, 1)]
        fig = render_bars(agg)
        heights = [p.get_height() for p in fig.axes[0].patches]
        assert heights == [3.0, 7.0]

    def test_error_rows_skipped(self, tmp_path):
        path = sweep_fixture(tmp_path, ["10,0,2.0,1.0,ok", "10,1,nan,nan,error: x"])
        _, agg = load_sweep(path)
        assert agg == [(10, 2.0, 0.0, 1)]

    def test_empty_csv_rejected(self, tmp_path):
        path = sweep_fixture(tmp_path, [])
        with pytest.raises(ValueError):
            load_sweep(path)

    def test_main_writes_png_and_svg(self, tmp_path):
        t0 = time.monotonic()
        path = sweep_fixture(tmp_path, ["100,0,5.0,1.0,ok", "200,0,6.0,1.0,ok"])
        out = tmp_path / "bars"
        assert bars_main(["--in", str(path), "--out", str(out)]) == 0
        assert (tmp_path / "bars.png").stat().st_size > 0
        assert (tmp_path / "bars.svg").stat().st_size > 0
        assert time.monotonic() - t0 < 10


class TestFingerprintCaption:
    def test_caption_embedded(self, tmp_path):
        fp, data = load_binned(binned_fixture(tmp_path))
        fig = render_stairs(data, [0], fp)
        texts = [t.get_text() for t in fig.texts]
        assert "fingerprint=deadbeef" in texts

    def test_rerender_identical_data(self, tmp_path):
        _, data = load_binned(binned_fixture(tmp_path))
        f1 = render_stairs(data, [0])
        f2 = render_stairs(data, [0])
        assert np.array_equal(f1.axes[0].lines[0].get_ydata(),
                              f2.axes[0].lines[0].get_ydata())
