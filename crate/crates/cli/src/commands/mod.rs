pub mod gauss;
pub mod hedge;
pub mod highdim;
pub mod ingest;
