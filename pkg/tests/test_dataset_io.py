import io
import json

import numpy as np
import numpy.testing as npt
import pytest

import config
from dataset_io import (
    format_number,
    load_dm_channel,
    normalize,
    open_output,
    parse_dm_channel,
    read_slices_csv,
    save_dm_channel,
    slice_document,
    write_json,
    write_slices_csv,
)
from dm_bounds import product_degraded_channel, random_dm_channel
from error_handling import ChannelFileError, DomainError
from gaussian_rates import ChannelParams
from region_geometry import RegionHandle, boundary_slice


def broadcast_slice():
    handle = RegionHandle.create("gaussian-bc", ChannelParams(P=10.0, N1=1.0, N2=4.0), alpha=3)
    return boundary_slice(handle, 0.0, 3)


def identity_document():
    # y1 = x, y2 = x1
    p = np.zeros((2, 2, 2, 2))
    for x in range(2):
        for x1 in range(2):
            p[x, x1, x, x1] = 1.0
    return {"alphabets": {"x": 2, "x1": 2, "y1": 2, "y2": 2}, "p": p.tolist()}


class TestNumberFormatting:

    def test_significant_digits(self):
        assert format_number(1.0 / 3.0) == "0.333333333333"
        assert format_number(0.5) == "0.5"
        assert format_number(3) == "3"

    def test_missing_values(self):
        assert format_number(None) == ""
        assert format_number(float("nan")) == ""

    def test_negative_zero(self):
        assert format_number(-0.0) == "0"

    def test_normalize(self):
        data = normalize({
            "third": np.float64(1.0 / 3.0),
            "array": np.array([1, 2]),
            "inf": float("inf"),
            "nan": float("nan"),
            "flag": np.bool_(True),
            1: (0.25,),
        })
        assert data == {"third": 0.333333333333, "array": [1, 2], "inf": "inf", "nan": None,
                        "flag": True, "1": [0.25]}


class TestSliceFiles:

    def test_csv_layout(self):
        stream = io.StringIO()
        assert write_slices_csv([broadcast_slice()], stream) == 3
        lines = stream.getvalue().splitlines()
        assert lines[0] == ",".join(config.CSV_HEADER)
        assert lines[1].startswith("gaussian-bc,0,,,,0,0,")

    def test_csv_read_back(self):
        stream = io.StringIO()
        write_slices_csv([broadcast_slice()], stream)
        rows = read_slices_csv(io.StringIO(stream.getvalue()))
        assert [row["alpha"] for row in rows] == [0.0, 0.5, 1.0]
        assert rows[0]["beta"] is None
        assert rows[-1]["r1"] == pytest.approx(0.5 * np.log2(11.0), abs=1e-11)

    def test_csv_header_is_checked(self):
        with pytest.raises(DomainError):
            read_slices_csv(io.StringIO("model,r1,r2\nx,1,2\n"))

    def test_csv_rejects_non_numeric(self):
        header = ",".join(config.CSV_HEADER)
        with pytest.raises(DomainError):
            read_slices_csv(io.StringIO(f"{header}\ngaussian-bc,0,,,,0,abc,0\n"))

    def test_json_document(self):
        stream = io.StringIO()
        write_json([slice_document(broadcast_slice())], stream)
        document = json.loads(stream.getvalue())[0]
        assert document["model"] == "gaussian-bc"
        assert document["params"]["P"] == 10.0
        assert len(document["points"]) == 3

    def test_output_creates_directories(self, tmp_path):
        target = tmp_path / "nested" / "out.txt"
        with open_output(str(target)) as stream:
            stream.write("ok")
        assert target.read_text() == "ok"


class TestChannelFiles:

    def test_parse_partial_channel(self):
        channel = parse_dm_channel(identity_document())
        assert channel.p.shape == (2, 2, 1, 2, 2)
        assert channel.p[1, 0, 0, 1, 0] == 1.0

    def test_missing_entries(self):
        with pytest.raises(ChannelFileError):
            parse_dm_channel({"p": []})
        with pytest.raises(ChannelFileError):
            parse_dm_channel([1, 2])

    def test_bad_alphabets(self):
        document = identity_document()
        document["alphabets"]["x"] = "two"
        with pytest.raises(ChannelFileError):
            parse_dm_channel(document)
        document["alphabets"]["x"] = 0
        with pytest.raises(ChannelFileError):
            parse_dm_channel(document)

    def test_shape_mismatch(self):
        document = identity_document()
        document["alphabets"]["y1"] = 3
        with pytest.raises(ChannelFileError, match="shape"):
            parse_dm_channel(document)

    def test_negative_probability(self):
        document = identity_document()
        document["p"][0][0][1][0] = -0.5
        with pytest.raises(ChannelFileError):
            parse_dm_channel(document)

    def test_error_names_the_bad_slice(self):
        document = identity_document()
        document["p"][1][0][0][0] = 0.5
        with pytest.raises(ChannelFileError, match=r"p\[1\]\[0\] sums"):
            parse_dm_channel(document)

    def test_small_drift_is_renormalised(self):
        document = identity_document()
        document["p"][0][1][0][1] = 1.0 + 1e-10
        channel = parse_dm_channel(document)
        npt.assert_allclose(channel.p.sum(axis=(3, 4)), 1.0, atol=1e-15)

    def test_save_and_load(self, tmp_path):
        path = str(tmp_path / "channel.json")
        channel = product_degraded_channel(seed=2)
        save_dm_channel(channel, path)
        npt.assert_allclose(load_dm_channel(path).p, channel.p, atol=1e-15)

    def test_full_channel_keeps_relay_two_axis(self, tmp_path):
        path = str(tmp_path / "full.json")
        save_dm_channel(random_dm_channel((2, 2, 2, 2, 2), seed=2), path)
        assert load_dm_channel(path).is_full

    def test_load_errors(self, tmp_path):
        with pytest.raises(ChannelFileError, match="does not exist"):
            load_dm_channel(str(tmp_path / "missing.json"))
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(ChannelFileError, match="not valid JSON"):
            load_dm_channel(str(broken))
