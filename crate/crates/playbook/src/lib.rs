//! Playbook repository service: on-disk storage, incident sessions with
//! journals, log export, LLM assistance, the HTTP API and the CLI.

pub mod api;
pub mod assist;
pub mod cli;
pub mod clock;
pub mod export;
pub mod sessions;
pub mod store;
pub mod tabletop;
