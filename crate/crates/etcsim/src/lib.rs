//! Co-simulation of event-triggered control strategies over TDMA wireless
//! MAC protocols, driving a switched three-tank water network plant.

pub mod certify;
pub mod control;
pub mod cosim;
pub mod harness;
pub mod macsim;
pub mod plant;
pub mod triggers;
