//! Spark-ignition engine case study: plant model and cascaded controllers.

pub mod control;
pub mod plant;

pub use control::{
    CascadeStep, ChannelGains, ControlError, DesiredTrajectories, EngineChannel,
    EngineControllerBank, EngineGains,
};
pub use plant::{
    EngineError, EngineInputs, EngineParams, EngineState, EngineUncertainty,
};
