import json
import os
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basketgen import cli
from basketgen.dataio import (
    Basket,
    CatalogRecord,
    CustomerHistory,
    DanglingProductError,
    SchemaError,
    SyntheticWorldConfig,
    generate_synthetic_world,
    load_transactions,
    read_catalog,
    read_generated,
    read_transactions,
    write_catalog,
    write_generated,
    write_transactions,
)
from basketgen.dataio.config import (
    STREAMS,
    ConfigError,
    PipelineConfig,
    load_config,
    stream_seed,
)
from basketgen.dataio.schema import atomic_open
from basketgen.evaluation import mine_patterns, sequence_db

DESK = str(resources.files("basketgen").joinpath("configs", "desk.toml"))


def _write(path, text):
    path.write_text(text)
    return str(path)


CATALOG = ("product_id,name,description,category,subcategory,brand,price\n"
           "p1,Milk,fresh milk,dairy,dairy / 1,Acme,1.5\n"
           "p2,Bread,white bread,bakery,bakery / 1,Acme,2.0\n")


# --- schema ------------------------------------------------------------------------------

def test_two_rows_one_basket(tmp_path):
    cat = _write(tmp_path / "c.csv", CATALOG)
    tx = _write(tmp_path / "t.csv", "customer_id,week,product_id,quantity\nc1,0,p1,1\nc1,0,p2,1\n")
    histories, catalog = load_transactions(tx, cat)
    assert len(catalog) == 2
    assert histories == [CustomerHistory("c1", [Basket("c1", 0, ["p1", "p2"])])]


def test_baskets_sorted_by_week_and_quantity_expands(tmp_path):
    tx = _write(tmp_path / "t.csv", "customer_id,week,product_id,quantity\n"
                                    "c2,3,p1,1\nc1,2,p2,2\nc1,0,p1,1\n")
    hs = read_transactions(tx)
    assert [h.customer_id for h in hs] == ["c1", "c2"]
    assert [b.week for b in hs[0].baskets] == [0, 2]
    assert hs[0].baskets[1].products == ["p2", "p2"]


@pytest.mark.parametrize("body, match", [
    ("c1,0,p1\n", ":2: expected 4 fields"),
    ("c1,0,p1,1\nc1,x,p1,1\n", ":3: week and quantity"),
    ("c1,-1,p1,1\n", ":2: invalid"),
    ("c1,0,p1,0\n", ":2: invalid"),
])
def test_schema_errors_name_the_row(tmp_path, body, match):
    tx = _write(tmp_path / "t.csv", "customer_id,week,product_id,quantity\n" + body)
    with pytest.raises(SchemaError, match=match):
        read_transactions(tx)


def test_bad_header_and_dangling_product(tmp_path):
    with pytest.raises(SchemaError, match="header"):
        read_transactions(_write(tmp_path / "t.csv", "a,b,c,d\n"))
    cat = _write(tmp_path / "c.csv", CATALOG)
    tx = _write(tmp_path / "t2.csv", "customer_id,week,product_id,quantity\nc1,0,p9,1\n")
    with pytest.raises(DanglingProductError, match="p9"):
        load_transactions(tx, cat)


@pytest.mark.parametrize("row, match", [
    ("p1,a,b,dairy,d,Acme,1.0", "duplicate"),
    ("p3,a,b,,d,Acme,1.0", "empty category"),
    ("p3,a,b,c,d,Acme,-1", "negative price"),
    ("p3,a,b,c,d,Acme,cheap", "bad price"),
])
def test_catalog_errors(tmp_path, row, match):
    with pytest.raises(SchemaError, match=match):
        read_catalog(_write(tmp_path / "c.csv", CATALOG + row + "\n"))


_ids = st.sampled_from(["p1", "p2", "p3", "p,4", 'p"5'])


@st.composite
def _histories(draw):
    out = []
    for n in range(draw(st.integers(1, 5))):
        weeks = draw(st.lists(st.integers(0, 9), min_size=1, max_size=4, unique=True))
        cid = f"c{n}"
        out.append(CustomerHistory(cid, [Basket(cid, w, draw(st.lists(_ids, min_size=1, max_size=4)))
                                         for w in sorted(weeks)]))
    return out


@settings(max_examples=40, deadline=None)
@given(_histories())
def test_transactions_round_trip(tmp_path_factory, histories):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_transactions(path, histories)
    assert read_transactions(path) == histories


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.text(st.characters(blacklist_characters="\x00",
                                               blacklist_categories=("Cs",)), max_size=8),
                          st.floats(0, 1e6)), min_size=1, max_size=5))
def test_catalog_round_trip(tmp_path_factory, rows):
    records = [CatalogRecord(f"p{i}", name, f"{name}\nline two", "cat", "cat / 1", "b", price)
               for i, (name, price) in enumerate(rows)]
    path = tmp_path_factory.mktemp("rt") / "c.csv"
    write_catalog(path, records)
    assert read_catalog(path) == records


def test_generated_round_trip(tmp_path):
    real = [CustomerHistory("c1", [Basket("c1", 0, ["p1"])])]
    gen = [CustomerHistory("c1", [Basket("c1", 1, ["p2", "p1"])])]
    write_generated(tmp_path / "g.csv", real, gen)
    assert read_generated(tmp_path / "g.csv") == (real, gen)
    header = (tmp_path / "g.csv").read_text().splitlines()[0]
    assert header == "customer_id,week,product_id,quantity,generated"


def test_atomic_write_keeps_old_file_on_error(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")
    with pytest.raises(RuntimeError):
        with atomic_open(target) as fh:
            fh.write("partial")
            raise RuntimeError("boom")
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["out.txt"]


# --- synthetic world --------------------------------------------------------------------------

def test_degenerate_chain():
    cfg = SyntheticWorldConfig(customers=50, products=9, categories=3, personas=1, focus=1.0,
                               basket_size_means=[3.0], preference_weights=[[1.0, 0.0, 0.0]],
                               transitions=[np.eye(3).tolist()], seed=1)
    world = generate_synthetic_world(cfg)
    cat = {r.product_id: r.category for r in world.catalog}
    first = world.manifest["categories"][0]
    assert {cat[p] for h in world.histories for p in h.products()} == {first}
    planted = [b for b in world.manifest["top_planted_bigrams"] if b["score"] > 0]
    assert planted == [{"pattern": [first, first], "score": 1.0}]


def test_persona_category_frequencies():
    prefs = [[0.5, 0.3, 0.2, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.6, 0.3, 0.1]]
    trans = [[p] * 6 for p in prefs]  # focus drawn from the preferences every week
    cfg = SyntheticWorldConfig(customers=2000, products=12, categories=6, personas=2, weeks=5,
                               preference_weights=prefs, transitions=trans,
                               basket_size_means=[2.0], seed=3)
    world = generate_synthetic_world(cfg)
    names = world.manifest["categories"]
    cat = {r.product_id: names.index(r.category) for r in world.catalog}
    counts = np.zeros((2, 6))
    baskets = 0
    for h in world.histories:
        p = world.manifest["personas"][h.customer_id]
        for b in h.baskets:
            baskets += 1
            for pid in b.products:
                counts[p, cat[pid]] += 1
    assert baskets == 10_000
    freqs = counts / counts.sum(axis=1, keepdims=True)
    np.testing.assert_allclose(freqs, prefs, atol=0.02)


def test_transition_counts_match_the_chain():
    trans = [[[0.1, 0.6, 0.3], [0.5, 0.2, 0.3], [0.3, 0.3, 0.4]]]
    cfg = SyntheticWorldConfig(customers=10_000, products=6, categories=3, personas=1,
                               preference_weights=[[1 / 3] * 3], transitions=trans,
                               basket_size_means=[1.0], seed=4)
    world = generate_synthetic_world(cfg)
    names = world.manifest["categories"]
    counts = np.zeros((3, 3))
    for states in world.manifest["focus_categories"].values():
        for a, b in zip(states, states[1:]):
            counts[names.index(a), names.index(b)] += 1
    np.testing.assert_allclose(counts / counts.sum(axis=1, keepdims=True), trans[0], atol=0.05)


def test_invalid_world_configs():
    with pytest.raises(ValueError, match="sums to"):
        SyntheticWorldConfig(categories=2, personas=1, basket_size_means=[2.0],
                             transitions=[[[0.5, 0.4], [0.5, 0.5]]]).validate()
    with pytest.raises(ValueError, match="positive"):
        SyntheticWorldConfig(customers=0).validate()
    with pytest.raises(ValueError, match="products"):
        SyntheticWorldConfig(products=3, categories=8).validate()


def test_same_seed_same_world():
    cfg = SyntheticWorldConfig(customers=30, seed=9)
    a, b = generate_synthetic_world(cfg), generate_synthetic_world(cfg)
    assert a.catalog == b.catalog and a.histories == b.histories


def test_planted_bigrams_are_mined_back():
    world = generate_synthetic_world(SyntheticWorldConfig(seed=0))
    by_id = {r.product_id: r for r in world.catalog}
    mined = mine_patterns(sequence_db(world.histories, by_id, "category"), 0.01, 2)
    support = {p.itemsets: p.support for p in mined}
    n = len(world.histories)
    for planted in world.manifest["top_planted_bigrams"][:3]:
        a, b = planted["pattern"]
        key = ((a,), (b,)) if a != b else ((a,), (a,))
        assert support.get(key, 0) / n > planted["score"]


# --- config ------------------------------------------------------------------------------------

def test_defaults_validate_and_round_trip(tmp_path):
    cfg = load_config()
    assert cfg.gan.lam == 10.0 and cfg.gan.n_critic == 5 and cfg.lstm.epochs == 25
    cfg.dump(tmp_path / "c.toml")
    assert load_config(tmp_path / "c.toml") == cfg


def test_desk_config_loads():
    cfg = load_config(DESK)
    assert cfg.world.customers == 120 and cfg.gan.hidden == (32, 32)


@pytest.mark.parametrize("text, match", [
    ("bogus = 1\n", "unknown config key"),
    ("[gan]\nlamda = 1.0\n", "unknown key"),
    ("[gan]\nseed = 3\n", "top-level seed"),
    ("[gan]\nepochs = 'ten'\n", "expected int"),
    ("[gan]\nlam = -1.0\n", "lam"),
    ("[world]\ncustomers = 0\n", "positive"),
    ("gan = 3\n", "must be a table"),
    ("[gan\n", "c.toml"),
])
def test_config_errors(tmp_path, text, match):
    with pytest.raises(ConfigError, match=match):
        load_config(_write(tmp_path / "c.toml", text))


def test_overrides_and_int_to_float():
    cfg = load_config(overrides={"gan.lam": 0, "seed": 4, "generation.k": None})
    assert cfg.gan.lam == 0.0 and isinstance(cfg.gan.lam, float)
    assert cfg.seed == 4 and cfg.generation.k == 10


def test_streams_are_distinct_and_stable():
    seeds = {name: stream_seed(7, name) for name in STREAMS}
    assert len(set(seeds.values())) == len(STREAMS)
    assert seeds == {name: stream_seed(7, name) for name in STREAMS}
    cfg = PipelineConfig(seed=7)
    assert cfg.world_config().seed == seeds["world"]
    assert cfg.generation_config().seed == seeds["generation"]
    assert stream_seed(8, "gan") != seeds["gan"]


# --- CLI --------------------------------------------------------------------------------------

def _cli(*args):
    return cli.main([*args, "-q"])


def test_cli_all_twice_is_byte_identical(tmp_path):
    outputs = []
    for run in ("a", "b"):
        workdir = tmp_path / run
        assert _cli("all", "--config", DESK, "--seed", "7", "--workdir", str(workdir)) == 0
        files = sorted(p.relative_to(workdir) for p in workdir.rglob("*.csv"))
        outputs.append({str(f): (workdir / f).read_bytes() for f in files})
    assert outputs[0].keys() == outputs[1].keys()
    assert "output/generated.csv" in outputs[0]
    for name in outputs[0]:
        assert outputs[0][name] == outputs[1][name], name
    prov = (tmp_path / "a" / "provenance" / "generate.toml").read_text()
    assert "seed = 7" in prov


def test_cli_evaluate_without_generate(tmp_path):
    assert _cli("evaluate", "--workdir", str(tmp_path)) == cli.EXIT_MISSING_INPUT


def test_cli_synth_sizes(tmp_path):
    assert _cli("synth-data", "--customers", "100", "--products", "50",
                "--workdir", str(tmp_path)) == 0
    catalog = read_catalog(tmp_path / "data" / "catalog.csv")
    histories = read_transactions(tmp_path / "data" / "transactions.csv")
    assert len(catalog) == 50
    assert len({h.customer_id for h in histories}) >= 100
    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    assert manifest["config"]["customers"] == 100


def test_cli_exit_codes(tmp_path):
    assert _cli("bogus") == cli.EXIT_USAGE
    assert _cli("generate", "--nope") == cli.EXIT_USAGE
    assert _cli("generate", "--k", "many") == cli.EXIT_USAGE
    assert _cli("synth-data", "--config", str(tmp_path / "none.toml")) == cli.EXIT_CONFIG
    assert _cli("train-gan", "--lam", "-1") == cli.EXIT_CONFIG


def test_cli_generate_subset_and_stage_failure(tmp_path):
    work = str(tmp_path / "w")
    assert _cli("all", "--config", DESK, "--workdir", work) == 0
    ids = tmp_path / "ids.txt"
    ids.write_text("C001\nC002\n")
    assert _cli("generate", "--config", DESK, "--workdir", work, "--customers", str(ids)) == 0
    real, gen = read_generated(os.path.join(work, "output", "generated.csv"))
    assert [h.customer_id for h in gen] == ["C001", "C002"]
    assert all(len(h.baskets) == 5 for h in gen)
    ids.write_text("nobody\n")
    assert _cli("generate", "--config", DESK, "--workdir", work,
                "--customers", str(ids)) == cli.EXIT_STAGE_FAILURE
    assert _cli("generate", "--config", DESK, "--workdir", work,
                "--k", "100000") == cli.EXIT_STAGE_FAILURE


def test_cli_help_lists_exit_codes(capsys):
    assert cli.main(["all", "--help"]) == 0
    out = capsys.readouterr().out
    assert "missing input" in out and "stage failure" in out
