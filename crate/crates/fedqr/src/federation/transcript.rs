use std::collections::BTreeSet;
use std::fmt;

use super::session::AggregationMode;
use crate::smpc::FieldElement;

/// A party in the star topology. `Broadcast` is a receiver-only
/// pseudo-principal: an entry addressed to it is visible to every party.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Principal {
    Client(usize),
    Aggregator,
    Broadcast,
}

impl fmt::Display for Principal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Principal::Client(s) => write!(f, "client:{s}"),
            Principal::Aggregator => write!(f, "aggregator"),
            Principal::Broadcast => write!(f, "broadcast"),
        }
    }
}

/// Message contents: protocol values travel either as plain reals or as
/// field elements (shares and share aggregates).
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Reals(Vec<f64>),
    Fields(Vec<FieldElement>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::Reals(v) => v.len(),
            Payload::Fields(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The real values, if this is a clear-text message.
    pub fn as_reals(&self) -> Option<&[f64]> {
        match self {
            Payload::Reals(v) => Some(v),
            Payload::Fields(_) => None,
        }
    }
}

/// One observed message.
///
/// Label convention: a base label names the protocol quantity
/// (e.g. `gs/norm`); clear client-to-aggregator messages carry the suffix
/// `.raw`, secret shares `.share`, share aggregates `.partial`, and
/// aggregator broadcasts the bare base label.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptEntry {
    pub round: usize,
    pub sender: Principal,
    pub receiver: Principal,
    pub label: String,
    pub payload: Payload,
}

impl TranscriptEntry {
    /// Label with any phase suffix (`.raw`, `.share`, `.partial`) removed.
    pub fn base_label(&self) -> &str {
        base_of(&self.label)
    }
}

fn base_of(label: &str) -> &str {
    label
        .strip_suffix(".raw")
        .or_else(|| label.strip_suffix(".share"))
        .or_else(|| label.strip_suffix(".partial"))
        .unwrap_or(label)
}

/// Append-only record of everything exchanged during a protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    mode: AggregationMode,
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn new(mode: AggregationMode) -> Self {
        Transcript {
            mode,
            entries: Vec::new(),
        }
    }

    pub fn mode(&self) -> AggregationMode {
        self.mode
    }

    pub fn record(&mut self, entry: TranscriptEntry) {
        self.entries.push(entry);
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Everything client `s` observes: messages it sent, messages addressed
    /// to it, and broadcasts.
    pub fn client_view(&self, s: usize) -> Vec<&TranscriptEntry> {
        self.entries
            .iter()
            .filter(|e| {
                e.sender == Principal::Client(s)
                    || e.receiver == Principal::Client(s)
                    || e.receiver == Principal::Broadcast
            })
            .collect()
    }

    /// Everything the aggregator observes: messages it received or sent
    /// (broadcasts included, since it is their sender).
    pub fn aggregator_view(&self) -> Vec<&TranscriptEntry> {
        self.entries
            .iter()
            .filter(|e| e.sender == Principal::Aggregator || e.receiver == Principal::Aggregator)
            .collect()
    }

    /// Distinct base labels in the aggregator's view. The privacy audits
    /// compare this census against the closed set a protocol is allowed to
    /// reveal.
    pub fn aggregator_label_census(&self) -> BTreeSet<String> {
        self.aggregator_view()
            .iter()
            .map(|e| e.base_label().to_owned())
            .collect()
    }

    /// Labels of clear (`.raw`) messages the aggregator received. Must be
    /// empty for any protocol claiming its aggregations are secure.
    pub fn aggregator_raw_labels(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|e| e.receiver == Principal::Aggregator && e.label.ends_with(".raw"))
            .map(|e| e.label.clone())
            .collect()
    }

    /// Line-delimited export, one entry per line, stable field order.
    pub fn export_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let payload = match &e.payload {
                Payload::Reals(v) => {
                    let items: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                    format!("reals:{}", items.join(","))
                }
                Payload::Fields(v) => {
                    let items: Vec<String> = v.iter().map(|x| x.0.to_string()).collect();
                    format!("fields:{}", items.join(","))
                }
            };
            out.push_str(&format!(
                "round={} sender={} receiver={} label={} payload={}\n",
                e.round, e.sender, e.receiver, e.label, payload
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(
        round: usize,
        sender: Principal,
        receiver: Principal,
        label: &str,
        vals: Vec<f64>,
    ) -> TranscriptEntry {
        TranscriptEntry {
            round,
            sender,
            receiver,
            label: label.to_owned(),
            payload: Payload::Reals(vals),
        }
    }

    #[test]
    fn base_label_strips_phase_suffixes() {
        for (label, base) in [
            ("gs/norm.raw", "gs/norm"),
            ("gs/norm.share", "gs/norm"),
            ("gs/norm.partial", "gs/norm"),
            ("gs/norm", "gs/norm"),
            ("raw.partial", "raw"),
        ] {
            let e = entry(0, Principal::Aggregator, Principal::Broadcast, label, vec![]);
            assert_eq!(e.base_label(), base);
        }
    }

    #[test]
    fn empty_transcript_views_are_empty() {
        let t = Transcript::new(AggregationMode::Clear);
        assert!(t.client_view(0).is_empty());
        assert!(t.aggregator_view().is_empty());
        assert!(t.aggregator_label_census().is_empty());
    }

    #[test]
    fn views_filter_by_principal() {
        let mut t = Transcript::new(AggregationMode::Clear);
        t.record(entry(
            0,
            Principal::Client(0),
            Principal::Aggregator,
            "x.raw",
            vec![1.0],
        ));
        t.record(entry(
            0,
            Principal::Client(1),
            Principal::Aggregator,
            "x.raw",
            vec![2.0],
        ));
        t.record(entry(
            0,
            Principal::Aggregator,
            Principal::Broadcast,
            "x",
            vec![3.0],
        ));
        t.record(entry(
            1,
            Principal::Client(0),
            Principal::Client(1),
            "y.share",
            vec![9.0],
        ));

        // Client 0 sees its own sends, the broadcast, but not client 1's
        // message to the aggregator.
        let v0 = t.client_view(0);
        assert_eq!(v0.len(), 3);
        assert!(v0.iter().all(|e| e.sender == Principal::Client(0)
            || e.receiver == Principal::Client(0)
            || e.receiver == Principal::Broadcast));

        // Client 1 sees its own send, the broadcast, and the share sent to
        // it, but not client 0's raw message.
        let v1 = t.client_view(1);
        assert_eq!(v1.len(), 3);

        // The aggregator sees both raw messages and its broadcast, not the
        // client-to-client share.
        let va = t.aggregator_view();
        assert_eq!(va.len(), 3);
        assert!(va.iter().all(|e| e.label != "y.share"));
    }

    #[test]
    fn census_collapses_suffixes() {
        let mut t = Transcript::new(AggregationMode::Smpc);
        t.record(entry(
            0,
            Principal::Client(0),
            Principal::Aggregator,
            "gs/norm.partial",
            vec![],
        ));
        t.record(entry(
            0,
            Principal::Aggregator,
            Principal::Broadcast,
            "gs/norm",
            vec![1.0],
        ));
        let census = t.aggregator_label_census();
        assert_eq!(census.len(), 1);
        assert!(census.contains("gs/norm"));
        assert!(t.aggregator_raw_labels().is_empty());
    }

    #[test]
    fn export_round_trips_visually() {
        let mut t = Transcript::new(AggregationMode::Clear);
        t.record(entry(
            2,
            Principal::Client(3),
            Principal::Aggregator,
            "gv/xi.raw",
            vec![0.5, -1.25],
        ));
        t.record(TranscriptEntry {
            round: 3,
            sender: Principal::Client(0),
            receiver: Principal::Client(1),
            label: "n.share".to_owned(),
            payload: Payload::Fields(vec![FieldElement(7), FieldElement(11)]),
        });
        let text = t.export_lines();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[0],
            "round=2 sender=client:3 receiver=aggregator label=gv/xi.raw payload=reals:0.5,-1.25"
        );
        assert_eq!(
            lines[1],
            "round=3 sender=client:0 receiver=client:1 label=n.share payload=fields:7,11"
        );
    }

    #[test]
    fn transcripts_compare_for_determinism() {
        let mut a = Transcript::new(AggregationMode::Clear);
        let mut b = Transcript::new(AggregationMode::Clear);
        let e = entry(0, Principal::Client(0), Principal::Aggregator, "z.raw", vec![1.0]);
        a.record(e.clone());
        b.record(e);
        assert_eq!(a, b);
        b.record(entry(1, Principal::Client(0), Principal::Aggregator, "z.raw", vec![1.0]));
        assert_ne!(a, b);
    }
}
