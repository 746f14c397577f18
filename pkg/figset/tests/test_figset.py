"""Figure rendering: all four kinds, determinism, and error handling."""

import os

import pytest

from figset import FigureSpec, SchemaError, render
from figset import schemas
from figset.cli import main

SAMPLES = os.path.join(os.path.dirname(__file__), os.pardir, "sample_data")


def sample(name):
    return os.path.join(SAMPLES, name)


KIND_INPUTS = {
    "accuracy_curve": ["accuracy.csv", "sigmoids.csv"],
    "disturbance_grid": ["accuracy.csv"],
    "encoder_heatmap": ["encoder_sta.csv"],
    "sensor_map": ["heatmap.csv"],
}


class TestRenderKinds:
    @pytest.mark.parametrize("kind", sorted(KIND_INPUTS))
    def test_renders_from_samples(self, kind, tmp_path):
        out = str(tmp_path / f"{kind}.png")
        spec = FigureSpec(kind=kind, inputs=[sample(n) for n in KIND_INPUTS[kind]],
                          output=out)
        assert render(spec) == out
        assert os.path.getsize(out) > 1000

    @pytest.mark.parametrize("kind", sorted(KIND_INPUTS))
    def test_rerender_is_byte_stable(self, kind, tmp_path):
        inputs = [sample(n) for n in KIND_INPUTS[kind]]
        a = str(tmp_path / "a.png")
        b = str(tmp_path / "b.png")
        render(FigureSpec(kind=kind, inputs=inputs, output=a))
        render(FigureSpec(kind=kind, inputs=inputs, output=b))
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_inputs_not_modified(self, tmp_path):
        before = open(sample("accuracy.csv"), "rb").read()
        render(FigureSpec(kind="disturbance_grid",
                          inputs=[sample("accuracy.csv")],
                          output=str(tmp_path / "x.png")))
        assert open(sample("accuracy.csv"), "rb").read() == before

    def test_cell_restriction(self, tmp_path):
        out = str(tmp_path / "c.png")
        spec = FigureSpec(kind="accuracy_curve", inputs=[sample("accuracy.csv")],
                          output=out, style={"cell": "0.31:10"})
        render(spec)
        assert os.path.getsize(out) > 1000


class TestErrors:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            FigureSpec(kind="pie_chart", inputs=["x.csv"], output="y.png")

    def test_empty_csv_writes_nothing(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        out = tmp_path / "out.png"
        with pytest.raises(SchemaError):
            render(FigureSpec(kind="sensor_map", inputs=[str(empty)],
                              output=str(out)))
        assert not out.exists()

    def test_schema_error_names_column(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("cell,trial,q,provenance\n0.31:0.1,0,3,sspoc\n")
        with pytest.raises(SchemaError, match="accuracy"):
            schemas.read_accuracy(str(bad))

    def test_bad_value_names_column(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("cell,q,x,y,frequency\n0.31:0.1,11,1.0,2.0,oops\n")
        with pytest.raises(SchemaError, match="frequency"):
            schemas.read_heatmap(str(bad))

    def test_never_entries_parse(self):
        _, rows = schemas.read_encoder(sample("encoder_sta.csv"))
        assert any(r["q75"] is None for r in rows)
        assert any(r["q75"] is not None for r in rows)


class TestCli:
    def test_render_via_cli(self, tmp_path, capsys):
        out = str(tmp_path / "fig.png")
        rc = main(["--kind", "sensor_map", "--in", sample("heatmap.csv"),
                   "--out", out])
        assert rc == 0
        assert os.path.getsize(out) > 1000

    def test_missing_file_exits_one(self, tmp_path, capsys):
        rc = main(["--kind", "sensor_map", "--in", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "fig.png")])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_bad_kind_exits_one(self, capsys):
        assert main(["--kind", "nope", "--in", "a.csv", "--out", "b.png"]) == 1
