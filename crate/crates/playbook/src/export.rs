//! Plain-text incident log export.

use std::fmt::Write;

use playbook_core::IncidentSession;

/// Renders the session log as a header line followed by one
/// `HH:MM AM - text` block per event, blocks separated by blank lines.
/// Times are shown in each event's own recorded offset.
pub fn export_log(session: &IncidentSession) -> String {
    let mut out = format!(
        "Incident Log: {} ({})\n",
        session.irp_title,
        session.started.format("%Y-%m-%d")
    );
    for event in &session.log {
        let _ = write!(
            out,
            "\n{} - {}\n",
            event.timestamp.format("%I:%M %p"),
            event.text
        );
    }
    out
}
