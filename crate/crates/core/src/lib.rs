pub mod aerodb;
pub mod bridge;
pub mod datafusion;
pub mod flightsim;
pub mod propulsion;
pub mod vehicle;
pub mod session;
