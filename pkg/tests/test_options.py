import io
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uqforge.errors import InvalidArgumentError, OptionParseError, UnsupportedOptionError
from uqforge.options import (
    FAMILIES,
    INT,
    INTSET,
    REAL,
    REALS,
    STR,
    EnvSpec,
    OptionSet,
    check_supported,
    display_path,
    open_display_file,
    parse_options,
    read_matrix_text,
    seed_for_worker,
    sub_file_name,
    write_chain_files,
    write_matrix_text,
)


def test_every_table_key_has_a_default():
    opts = OptionSet()
    count = 0
    for fam, table in FAMILIES.items():
        for name, _, default in table:
            key = f"{fam}_{name}"
            assert opts.get(key) == default
            assert opts.provenance(key) == "default"
            count += 1
    assert count == len(opts.entries)


def test_table_spot_values():
    opts = OptionSet()
    assert opts.get("ip_mh_rawChain_size") == 100
    assert opts.get("ip_mh_am_epsilon") == 1e-5
    assert opts.get("ip_ml_minEffectiveSizeRatio") == 0.85
    assert opts.get("ip_ml_maxEffectiveSizeRatio") == 0.91
    assert opts.get("ip_ml_loadBalanceAlgorithmId") == 2
    assert opts.get("fp_mc_qseq_size") == 100
    assert opts.get("env_subDisplayFileName") == "."


def test_alias_spellings_are_one_key():
    opts = parse_options("ip_mh_rawChain_size = 7\nip_mh_dr_listOfScalesForExtraStages = 2 4\n")
    assert opts.get("ip_mh_rawChainSize") == 7
    assert opts.get("ip_mh_RAWCHAINSIZE") == 7
    assert opts.get("ip_mh_drScalesForExtraStages") == (2.0, 4.0)
    assert opts.provenance("ip_mh_rawChainSize") == "file"


def test_comments_blank_lines_and_duplicates():
    text = "# header\n\nfp_mc_qseq_size = 10  # trailing\nfp_mc_qseq_size = 20\n"
    assert parse_options(text).get("fp_mc_qseq_size") == 20


def test_line_without_equals_is_an_error():
    with pytest.raises(OptionParseError, match="line 2"):
        parse_options("env_seed = 1\njust words\n")


def test_type_mismatch_is_an_error():
    with pytest.raises(OptionParseError, match="line 1"):
        parse_options("ip_mh_rawChain_size = many\n")
    with pytest.raises(OptionParseError):
        parse_options("ip_mh_am_eta = 1.0.0\n")


def test_unknown_key_warns(caplog):
    with caplog.at_level(logging.WARNING):
        opts = parse_options("ip_mh_noSuchThing = 3\n")
    assert "ip_mh_noSuchThing" in opts.unknown
    assert any("unknown option" in w for w in opts.warnings)


def test_rejection_rates_are_flagged_as_ignored():
    opts = parse_options("ip_ml_default_minRejectionRate = 0.3\n")
    assert any("no effect" in w for w in opts.warnings)


def test_overrides_win_over_file():
    opts = parse_options("env_seed = 4\n", {"env_seed": -2})
    assert opts.get("env_seed") == -2
    assert opts.provenance("env_seed") == "override"


def test_level_lookup_order():
    opts = parse_options(
        "ip_ml_rawChain_size = 10\nip_ml_default_rawChain_size = 20\n"
        "ip_ml_3_rawChain_size = 30\nip_ml_last_rawChain_size = 40\n"
    )
    assert opts.level_value(3, "rawChainSize") == 30
    assert opts.level_value(2, "rawChainSize") == 20
    assert opts.level_value(2, "rawChainSize", is_last=True) == 40
    assert opts.level_value(3, "rawChainSize", is_last=True) == 30
    assert opts.level_keys_set() == {3, "last", "default"}
    assert OptionSet().level_value(5, "rawChainSize") == 100


def test_unsupported_options_fail_only_at_use():
    opts = parse_options("ip_mh_tkUseLocalHessian = 1\nip_ml_restartInput_baseNameForFiles = r\n")
    check_supported(opts, "fp_mc")
    with pytest.raises(UnsupportedOptionError):
        check_supported(opts, "ip_mh")
    with pytest.raises(UnsupportedOptionError):
        check_supported(opts, "ip_ml")
    opts = parse_options("ip_mh_rawChain_dataOutputFileName = out\nip_mh_rawChain_dataOutputFileType = hdf\n")
    with pytest.raises(UnsupportedOptionError):
        check_supported(opts, "ip_mh")


_VALUES = {
    INT: st.integers(-10 ** 6, 10 ** 6),
    REAL: st.floats(allow_nan=False, allow_infinity=False, width=64),
    STR: st.from_regex(r"[A-Za-z0-9_./]{1,12}", fullmatch=True),
    REALS: st.lists(st.floats(allow_nan=False, allow_infinity=False), max_size=4).map(tuple),
    INTSET: st.frozensets(st.integers(0, 64), max_size=5),
}
_KEYS = [(f"{fam}_{name}", typ) for fam, table in FAMILIES.items() for name, typ, _ in table]


@st.composite
def option_sets(draw):
    opts = OptionSet()
    picks = draw(st.lists(st.sampled_from(_KEYS), max_size=15, unique=True))
    for key, typ in picks:
        opts.set(key, draw(_VALUES[typ]))
    level = draw(st.integers(0, 9))
    opts.set(f"ip_ml_{level}_rawChainSize", draw(_VALUES[INT]))
    return opts


@settings(max_examples=80, deadline=None)
@given(option_sets())
def test_round_trip(opts):
    back = parse_options(opts.emit())
    assert back.values() == opts.values()


def test_seed_rule(caplog):
    assert seed_for_worker(-3, 0) == 3
    assert seed_for_worker(-3, 5) == 8
    with caplog.at_level(logging.WARNING):
        assert seed_for_worker(7, 3, 4) == 7
    assert "identical" in caplog.text
    with pytest.raises(InvalidArgumentError):
        seed_for_worker(0, -1)


def test_display_file_naming(tmp_path):
    env = EnvSpec(display_file_base="pROblem_775_", display_allow_all=True)
    assert display_path(env, 17).name == "pROblem_775_sub17.txt"
    assert display_path(EnvSpec(display_file_base="out/display", display_allow_all=True), 0).name == "display_sub0.txt"
    assert display_path(EnvSpec(), 0) is None
    assert display_path(EnvSpec(display_file_base="x"), 3) is None
    assert display_path(EnvSpec(display_file_base="x", display_allowed_set=frozenset({3})), 3) is not None
    sink = open_display_file(EnvSpec(display_file_base="deep/dir/disp", display_allow_all=True), 2, tmp_path)
    sink.write("hello\n")
    sink.close()
    assert (tmp_path / "deep/dir/disp_sub2.txt").read_text() == "hello\n"


def test_env_from_options():
    opts = parse_options("env_numSubEnvironments = 4\nenv_subDisplayAllowedSet = 0 2\nenv_seed = -1\n")
    env = EnvSpec.from_options(opts)
    assert env.num_sub_environments == 4 and env.seed == -1
    assert env.display_allowed_set == {0, 2}
    with pytest.raises(InvalidArgumentError):
        env.check_workers(6)


def test_matrix_text_format():
    buf = io.StringIO()
    write_matrix_text("x", [[2.5]], buf)
    assert buf.getvalue() == "x = [\n2.5\n];\n"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=3, max_size=3),
                min_size=1, max_size=20))
def test_matrix_round_trip_exact(rows):
    data = np.array(rows)
    buf = io.StringIO()
    write_matrix_text("ip_mh_rawChain_sub0", data, buf)
    back = read_matrix_text(buf.getvalue())["ip_mh_rawChain_sub0"]
    assert back.tobytes() == data.tobytes()


def test_chain_files(tmp_path):
    paths = write_chain_files("out/ip_raw_chain", "ip_mh_rawChain",
                              [(1, np.ones((2, 2))), (0, np.zeros((3, 2)))], tmp_path)
    names = [p.name for p in paths]
    assert names == ["ip_raw_chain_sub0.m", "ip_raw_chain_sub1.m", "ip_raw_chain_unified.m"]
    unified = read_matrix_text(paths[-1].read_text())["ip_mh_rawChain_unified"]
    assert unified.shape == (5, 2)
    assert sub_file_name("base_", 3, ".m") == "base_sub3.m"
