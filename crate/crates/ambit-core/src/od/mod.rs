//! OD data model: zones, hourly flows, ingestion, filtering, impedance,
//! masses, time splits, and the synthetic city generator.

mod filter;
mod flows;
mod impedance;
mod ingest;
mod mass;
mod split;
mod synth;
mod zones;

pub use filter::{filter_od_pairs, PairSet};
pub use flows::{FlowRow, FlowTable, HourStamp};
pub use impedance::{build_impedance, ImpedanceMatrix, ImpedanceSource, DISTANCE_FLOOR};
pub use ingest::{
    ingest_trip_records, ingest_trips, read_trips_csv, IngestReport, TripFilters, TripRecord,
};
pub use mass::{make_masses, MassDefinition, MassVector, MASS_SMOOTHING};
pub use split::{split_and_sample, SamplingMode, SplitIndices, SplitSpec};
pub use synth::{
    generate_synthetic_city, synthetic_trip_sample, SyntheticCity, SyntheticConfig,
    SyntheticManifest,
};
pub use zones::{PoiCategory, PoiCounts, Zone, ZoneId, ZoneTable};
