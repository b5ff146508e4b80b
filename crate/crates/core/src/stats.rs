use serde::{Deserialize, Serialize};

/// Execution counters accumulated by protocol runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecStats {
    /// Executions of an inconclusive-capable subroutine (first tries + reruns).
    pub attempts: u64,
    /// Attempts beyond the first, summed over all subroutine calls.
    pub reruns: u64,
    /// One-way quantum transmissions.
    pub quantum_messages: u64,
    /// Classical messages (result announcements, disclosures, verifications).
    pub classical_messages: u64,
    /// Classical bits exchanged.
    pub classical_bits: u64,
    /// Detector clicks observed, dark counts included.
    pub detector_clicks: u64,
}

impl ExecStats {
    pub fn merge(&mut self, other: &ExecStats) {
        self.attempts += other.attempts;
        self.reruns += other.reruns;
        self.quantum_messages += other.quantum_messages;
        self.classical_messages += other.classical_messages;
        self.classical_bits += other.classical_bits;
        self.detector_clicks += other.detector_clicks;
    }

    pub fn total_messages(&self) -> u64 {
        self.quantum_messages + self.classical_messages
    }
}
