from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from plotkit import load_results, main, plot_ber, uncoded_bpsk_theory

GOLDEN = Path(__file__).resolve().parent.parent.parent / "golden" / "uncoded-bpsk-sweep-results.txt"


@contextmanager
def criterion(num: int, name: str):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] criterion {num} ({name}): FAIL")
        raise
    print(f"\n[ACCEPTANCE] criterion {num} ({name}): PASS")


def write_sample(path: Path, rows: int = 3) -> Path:
    lines = [
        "# demo results",
        "# measures: SER FER",
        "# columns: parameter, per measure (estimate margin errors trials), samples",
    ]
    for i in range(rows):
        p = 1.0 + i
        lines.append(f"{p!r} {0.1 / (i + 1)!r} {0.01!r} {100 + i} {1000} 1.0 0.0 10 10 10")
    lines += ["# STATE", "# digest abc", "# point 1.0 1 10 2 100 1000 10 10", "# END-STATE"]
    path.write_text("\n".join(lines) + "\n")
    return path


class TestLoadResults:
    def test_golden_file(self):
        table = load_results(str(GOLDEN))
        assert table.labels == ["SER", "FER"]
        assert len(table) >= 60
        assert np.all(np.diff(table.parameters) > 0)  # sorted
        assert np.all(table.margins >= 0)

    def test_empty_file(self, tmp_path):
        f = tmp_path / "empty.txt"
        f.write_text("")
        assert len(load_results(str(f))) == 0

    def test_state_only_file(self, tmp_path):
        f = tmp_path / "state.txt"
        f.write_text("# measures: SER\n# STATE\n# point 1.0 1 10 1 5 50\n# END-STATE\n")
        assert len(load_results(str(f))) == 0

    def test_malformed_row_names_line(self, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("# measures: SER\n1.0 oops 0.1 1 10 1\n")
        with pytest.raises(ValueError, match=r"bad\.txt:2"):
            load_results(str(f))

    def test_row_before_header(self, tmp_path):
        f = tmp_path / "headless.txt"
        f.write_text("1.0 0.1 0.01 1 10 1\n")
        with pytest.raises(ValueError, match="measures header"):
            load_results(str(f))

    def test_exact_inverse_of_writer(self):
        """Every numeric field survives the parse exactly (repr round trip)."""
        table = load_results(str(GOLDEN))
        data_lines = [
            line.split()
            for line in GOLDEN.read_text().splitlines()
            if line.strip() and not line.lstrip().startswith("#")
        ]
        assert len(data_lines) == len(table)
        by_param = {repr(float(p)): i for i, p in enumerate(table.parameters)}
        for fields in data_lines:
            i = by_param[repr(float(fields[0]))]
            for m in range(table.measure_count):
                assert repr(float(table.estimates[i, m])) == fields[1 + 4 * m]
                assert repr(float(table.margins[i, m])) == fields[2 + 4 * m]
                assert str(int(table.errors[i, m])) == fields[3 + 4 * m]
                assert str(int(table.trials[i, m])) == fields[4 + 4 * m]
            assert str(int(table.samples[i])) == fields[-1]


class TestPlotBer:
    def test_golden_with_theory(self, tmp_path):
        table = load_results(str(GOLDEN))
        out = tmp_path / "curve.png"
        written = plot_ber([table], ["simulated"], str(out), overlay_theory="uncoded-bpsk")
        assert set(Path(w).suffix for w in written) == {".png", ".svg"}
        for w in written:
            assert Path(w).stat().st_size > 1000

    def test_two_tables(self, tmp_path):
        a = load_results(str(write_sample(tmp_path / "a.txt")))
        b = load_results(str(write_sample(tmp_path / "b.txt")))
        written = plot_ber([a, b], ["one", "two"], str(tmp_path / "two.png"))
        assert len(written) == 2

    def test_single_point_table(self, tmp_path):
        t = load_results(str(write_sample(tmp_path / "single.txt", rows=1)))
        assert len(t) == 1
        written = plot_ber([t], ["pt"], str(tmp_path / "single.svg"))
        assert all(Path(w).exists() for w in written)

    def test_empty_rejected(self, tmp_path):
        f = tmp_path / "none.txt"
        f.write_text("# measures: SER\n")
        with pytest.raises(ValueError, match="nothing to plot"):
            plot_ber([load_results(str(f))], ["x"], str(tmp_path / "no.png"))


class TestCli:
    def test_invocation(self, tmp_path, capsys):
        out = tmp_path / "cli.png"
        rc = main([str(GOLDEN), "--labels", "uncoded", "--theory", "uncoded-bpsk",
                   "-o", str(out)])
        assert rc == 0
        assert out.exists()
        assert out.with_suffix(".svg").exists()

    def test_default_labels(self, tmp_path):
        out = tmp_path / "default.png"
        assert main([str(GOLDEN), "-o", str(out)]) == 0

    def test_empty_input_nonzero_exit(self, tmp_path, capsys):
        f = tmp_path / "empty.txt"
        f.write_text("# measures: SER\n")
        assert main([str(f), "-o", str(tmp_path / "out.png")]) != 0
        assert capsys.readouterr().err.strip()

    def test_missing_file_nonzero_exit(self, tmp_path, capsys):
        assert main([str(tmp_path / "absent.txt"), "-o", str(tmp_path / "out.png")]) != 0


def test_criterion_9_golden_agreement(tmp_path):
    with criterion(9, "plot agrees with theory overlay on the golden sweep"):
        table = load_results(str(GOLDEN))
        assert len(table) >= 60
        out = tmp_path / "golden.png"
        written = plot_ber([table], ["uncoded BPSK"], str(out),
                           overlay_theory="uncoded-bpsk")
        assert Path(written[0]).stat().st_size > 0
        ser = table.labels.index("SER")
        theory = uncoded_bpsk_theory(table.parameters)
        inside = np.abs(table.estimates[:, ser] - theory) <= table.margins[:, ser]
        print(f"  {int(inside.sum())}/{len(table)} plotted points within their error bars")
        assert inside.all()

        # load_results round-trips the sink writer exactly (repr fidelity)
        line = next(
            l for l in GOLDEN.read_text().splitlines()
            if l.strip() and not l.lstrip().startswith("#")
        )
        first = line.split()
        i = int(np.argmin(np.abs(table.parameters - float(first[0]))))
        assert repr(float(table.parameters[i])) == first[0]
        assert repr(float(table.estimates[i, 0])) == first[1]
