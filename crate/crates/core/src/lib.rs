pub mod audio;
pub mod commands;
pub mod executor;
pub mod fuzzy;
pub mod geometry;
pub mod grammar;
pub mod orchestrator;
pub mod perception;
pub mod scene;
pub mod servo;
