use std::fmt;

use crate::geometry::CmLayer;

pub const EVENT_LOG_HEADER: &str = "time_s,event_type,drone_a,drone_b,layer,detail";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Detect,
    Formulate,
    Implement,
    Escalate,
    MonitorRetrigger,
    Resolved,
    CollisionAvoid,
    EvadeEnd,
    WellClearViolation,
    CollisionViolation,
    ZeroSeparation,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Detect => "detect",
            EventKind::Formulate => "formulate",
            EventKind::Implement => "implement",
            EventKind::Escalate => "escalate",
            EventKind::MonitorRetrigger => "monitor-retrigger",
            EventKind::Resolved => "resolved",
            EventKind::CollisionAvoid => "collision-avoid",
            EventKind::EvadeEnd => "evade-end",
            EventKind::WellClearViolation => "wc-violation",
            EventKind::CollisionViolation => "ca-violation",
            EventKind::ZeroSeparation => "zero-separation",
        }
    }
}

/// One line of the event log. `drone_a` is the reporting drone for manager
/// events and the lower id for ground-truth violations.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub time_s: f64,
    pub kind: EventKind,
    pub drone_a: u32,
    pub drone_b: u32,
    pub layer: CmLayer,
    pub detail: String,
}

impl fmt::Display for EventRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Commas would break the column layout.
        let detail = self.detail.replace(',', ";");
        write!(
            f,
            "{:.3},{},{},{},{},{}",
            self.time_s,
            self.kind.as_str(),
            self.drone_a,
            self.drone_b,
            self.layer.as_str(),
            detail
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_six_columns() {
        let r = EventRecord {
            time_s: 12.3456,
            kind: EventKind::Formulate,
            drone_a: 2,
            drone_b: 1,
            layer: CmLayer::WellClear,
            detail: "altitude-offset(+75.00, m)".into(),
        };
        let line = r.to_string();
        assert_eq!(line, "12.346,formulate,2,1,well-clear,altitude-offset(+75.00; m)");
        assert_eq!(line.split(',').count(), EVENT_LOG_HEADER.split(',').count());
    }
}
