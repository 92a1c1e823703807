# tests/test_cli.py
import asyncio
import csv
from pathlib import Path

import pytest

import cli
import database
from cli import TRIAL_FIELDS, fit_slopes, main, side_path

SMALL = str(Path(__file__).resolve().parents[1] / "configs" / "small.cfg")
QUICK = ["--config", SMALL, "--max-outer", "2"]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def test_run_writes_one_row(tmp_path):
    out = tmp_path / "run.csv"
    assert main(["run", *QUICK, "--trial", "1", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(TRIAL_FIELDS)
    assert len(lines) == 2
    row = read_csv(out)[0]
    assert row["scheme"] == "bcd"
    assert row["trial"] == "1"
    assert row["status"] in ("ok", "max-iter")
    assert 1 <= int(row["bits"]) <= 5


def test_run_is_byte_identical_across_reruns(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", *QUICK, "--out", str(a)]) == 0
    assert main(["run", *QUICK, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_run_dumps(tmp_path):
    chan, prog, trace = tmp_path / "chan.bin", tmp_path / "sub.txt", tmp_path / "sca.csv"
    assert main(["run", *QUICK, "--out", str(tmp_path / "r.csv"), "--dump-channels", str(chan),
                 "--dump-subproblem", str(prog), "--sca-trace", str(trace)]) == 0
    assert chan.exists() and Path(str(chan) + ".hdr").exists()
    # small.cfg: S = 4, M = 2, K = 2
    assert prog.read_text(encoding="utf-8").startswith(f"n {3 * 4 * 2 + 4 * 2 + 2}\n")
    assert trace.read_text(encoding="utf-8").splitlines()[0] == ",".join(cli.SCA_TRACE_FIELDS)


def test_trace_command(tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["trace", *QUICK, "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [int(r["iteration"]) for r in rows] == list(range(len(rows)))
    rates = [float(r["sum_rate"]) for r in rows]
    assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))


def test_sweep_orders_rows_and_stores_them(tmp_path):
    out, db = tmp_path / "asr.csv", str(tmp_path / "results.db")
    code = main(["sweep", *QUICK, "--param", "n_ris", "--values", "2,4", "--trials", "2",
                 "--scheme", "bcd,no-ris", "--out", str(out), "--db", db])
    assert code == 0
    rows = read_csv(out)
    assert [(r["value"], r["scheme"], r["trial"]) for r in rows] == [
        (v, s, t) for v in ("2", "4") for s in ("bcd", "no-ris") for t in ("0", "1")
    ]
    # common random numbers: same trial index, same seed
    assert len({r["seed"] for r in rows if r["trial"] == "0"}) == 1
    summary = read_csv(side_path(out, "summary"))
    assert len(summary) == 4
    assert all(s["ok"] == "2" for s in summary)
    assert len(read_csv(side_path(out, "timing"))) == 8

    sweeps = asyncio.run(database.list_sweeps(db))
    assert sweeps[0]["n_trials"] == 8


def test_sweep_without_db(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "s.csv"
    assert main(["sweep", *QUICK, "--trials", "1", "--no-db", "--out", str(out)]) == 0
    assert not (tmp_path / "results.db").exists()
    assert len(read_csv(out)) == 1


def test_sweep_rejects_invalid_values(tmp_path):
    out = tmp_path / "bad.csv"
    assert main(["sweep", *QUICK, "--param", "n_rf", "--values", "2,9", "--no-db", "--out", str(out)]) == 2


@pytest.mark.parametrize("values", ["", "2,x", " , "])
def test_sweep_rejects_malformed_values(tmp_path, values):
    out = tmp_path / "bad.csv"
    assert main(["sweep", *QUICK, "--param", "n_rf", "--values", values, "--no-db", "--out", str(out)]) == 2
    assert not out.exists()


def test_unknown_scheme_exits_with_config_error(tmp_path):
    assert main(["run", *QUICK, "--scheme", "genetic", "--out", str(tmp_path / "x.csv")]) == 2


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n_rf = 9\nn_beams = 8\nn_ap = 8\n", encoding="utf-8")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2


def test_failed_trial_is_recorded_and_sets_exit_code(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise FloatingPointError("diverged")

    monkeypatch.setattr(cli, "draw_trial", boom)
    out = tmp_path / "err.csv"
    assert main(["sweep", *QUICK, "--trials", "2", "--no-db", "--out", str(out)]) == 1
    rows = read_csv(out)
    assert [r["status"] for r in rows] == ["error", "error"]
    assert rows[0]["sum_rate"] == "nan"


def test_history_lists_sweeps(tmp_path, capsys):
    db = str(tmp_path / "results.db")
    assert main(["sweep", *QUICK, "--trials", "1", "--db", db, "--out", str(tmp_path / "h.csv")]) == 0
    assert main(["history", "--config", SMALL, "--db", db]) == 0
    assert "none" in capsys.readouterr().out
    assert main(["history", "--config", SMALL, "--db", db, "--sweep", "1"]) == 0
    assert "bcd" in capsys.readouterr().out


def test_fit_slopes_recovers_power_law():
    rows = [{"dim": "n_ris", "value": v, "repeat": r, "iterations": 2, "sca_s": 1e-3 * v ** 2, "mm_s": 1e-4 * v,
             "mo_s": 0.0} for v in (4, 8, 16) for r in range(2)]
    slopes, spread = fit_slopes(rows)
    by_block = {s["block"]: s for s in slopes}
    assert by_block["sca"]["slope"] == pytest.approx(2.0)
    assert by_block["mm"]["slope"] == pytest.approx(1.0)
    assert by_block["mo"]["points"] == 0
    assert all(s["std_s"] == 0.0 for s in spread)


def test_bench_writes_slopes(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", *QUICK, "--dims", "n_users", "--factors", "1,2", "--repeats", "1",
                 "--bench-outer", "1", "--out", str(out)]) == 0
    assert out.read_text(encoding="utf-8").startswith("# reference complexity")
    assert len(read_csv(out)) == 2
    assert len(read_csv(side_path(out, "slopes"))) == 3
