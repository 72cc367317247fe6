from .schema import (
    Basket,
    CatalogRecord,
    CustomerHistory,
    DanglingProductError,
    SchemaError,
    load_transactions,
    read_catalog,
    read_generated,
    read_transactions,
    read_vectors,
    write_catalog,
    write_generated,
    write_transactions,
    write_vectors,
)
from .synth import SyntheticWorld, SyntheticWorldConfig, generate_synthetic_world, write_world
