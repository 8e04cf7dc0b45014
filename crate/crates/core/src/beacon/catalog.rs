//! Wireless technology catalog and layer-suitability rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CmLayer, EnvironmentPreset, DEFAULT_MAX_SPEED};

/// The bundled catalog file.
pub const CATALOG_CSV: &str = include_str!("../../data/catalog.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkMode {
    Broadcast,
    Ground,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechnologyProfile {
    pub name: String,
    pub range_m: f64,
    pub min_update_s: Option<f64>,
    pub measured_update_min_s: Option<f64>,
    pub measured_update_max_s: Option<f64>,
    pub mode: LinkMode,
}

impl TechnologyProfile {
    /// Slowest update interval the technology is known to deliver.
    pub fn worst_case_update_s(&self) -> Option<f64> {
        self.measured_update_max_s.or(self.min_update_s)
    }
}

/// Parses catalog text with the bundled file's header.
pub fn parse_catalog(text: &str) -> Result<Vec<TechnologyProfile>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<TechnologyProfile>, _>>()
        .map_err(|e| Error::InvalidParameter(format!("catalog: {e}")))?;
    for row in &rows {
        if row.range_m.is_nan() || row.range_m <= 0.0 {
            return Err(Error::InvalidParameter(format!("catalog: {} has non-positive range", row.name)));
        }
    }
    Ok(rows)
}

/// Renders a catalog in the bundled file's format.
pub fn catalog_to_csv(catalog: &[TechnologyProfile]) -> Result<String> {
    fn num(v: Option<f64>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let err = |e: &dyn std::fmt::Display| Error::InvalidParameter(format!("catalog: {e}"));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["name", "range_m", "min_update_s", "measured_update_min_s", "measured_update_max_s", "mode"])
        .map_err(|e| err(&e))?;
    for row in catalog {
        let mode = match row.mode {
            LinkMode::Broadcast => "broadcast",
            LinkMode::Ground => "ground",
        };
        writer
            .write_record([
                row.name.clone(),
                row.range_m.to_string(),
                num(row.min_update_s),
                num(row.measured_update_min_s),
                num(row.measured_update_max_s),
                mode.to_string(),
            ])
            .map_err(|e| err(&e))?;
    }
    let bytes = writer.into_inner().map_err(|e| err(&e))?;
    String::from_utf8(bytes).map_err(|e| err(&e))
}

pub fn builtin_catalog() -> Vec<TechnologyProfile> {
    parse_catalog(CATALOG_CSV).expect("bundled catalog parses")
}

/// Technologies fit for a layer. Strategic deconfliction needs ground
/// infrastructure. Tactical layers need a broadcast link that reaches the
/// well-clear radius and refreshes faster than a worst-case head-on pair
/// crosses it.
pub fn suitable_technologies<'a>(
    layer: CmLayer,
    preset: &EnvironmentPreset,
    catalog: &'a [TechnologyProfile],
) -> Result<Vec<&'a TechnologyProfile>> {
    match layer {
        CmLayer::NoConflict => Err(Error::NotAConflictLayer(layer.as_str())),
        CmLayer::StrategicDeconfliction => Ok(catalog.iter().filter(|t| t.mode == LinkMode::Ground).collect()),
        CmLayer::WellClear | CmLayer::CollisionAvoidance => {
            let d_h = preset.well_clear.d_h;
            let crossing_s = d_h / (2.0 * DEFAULT_MAX_SPEED);
            Ok(catalog
                .iter()
                .filter(|t| t.mode == LinkMode::Broadcast && t.range_m >= d_h)
                .filter(|t| t.worst_case_update_s().is_some_and(|u| u <= crossing_s))
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(list: &[&TechnologyProfile]) -> Vec<String> {
        list.iter().map(|t| t.name.clone()).collect()
    }

    #[test]
    fn golden_rows() {
        type Row = (&'static str, f64, Option<f64>, Option<(f64, f64)>, LinkMode);
        use LinkMode::*;
        let expected: [Row; 13] = [
            ("Bluetooth", 100.0, Some(0.025), None, Broadcast),
            ("Bluetooth Low Energy", 50.0, Some(0.025), None, Broadcast),
            ("ZigBee", 100.0, Some(0.025), None, Broadcast),
            ("ANT", 30.0, Some(0.025), None, Broadcast),
            ("APRS", 20_000.0, Some(5.0), Some((11.0, 33.0)), Broadcast),
            ("ADS-B", 370_000.0, Some(0.5), None, Broadcast),
            ("RP ADS-B", 1200.0, Some(0.5), Some((2.0, 3.0)), Broadcast),
            ("Wi-Fi SSID", 800.0, Some(0.06), Some((0.1, 0.8)), Broadcast),
            ("LoRa", 15_000.0, Some(5.16), Some((5.16, 30.0)), Broadcast),
            ("Wi-Fi", 500.0, None, None, Ground),
            ("LTE", 1000.0, None, None, Ground),
            ("ADS-B", 370_000.0, None, None, Ground),
            ("LoRa", 15_000.0, None, None, Ground),
        ];
        let catalog = builtin_catalog();
        assert_eq!(catalog.len(), expected.len());
        for (row, (name, range, min, measured, mode)) in catalog.iter().zip(expected) {
            assert_eq!(row.name, name);
            assert_eq!(row.range_m, range);
            assert_eq!(row.min_update_s, min);
            assert_eq!(row.measured_update_min_s, measured.map(|m| m.0));
            assert_eq!(row.measured_update_max_s, measured.map(|m| m.1));
            assert_eq!(row.mode, mode);
        }
    }

    #[test]
    fn bundled_file_round_trips_byte_for_byte() {
        assert_eq!(catalog_to_csv(&builtin_catalog()).unwrap(), CATALOG_CSV);
    }

    #[test]
    fn urban_tactical_excludes_long_range_slow_links() {
        let catalog = builtin_catalog();
        let list = names(&suitable_technologies(CmLayer::WellClear, &EnvironmentPreset::URBAN, &catalog).unwrap());
        for banned in ["APRS", "ADS-B", "RP ADS-B", "LoRa"] {
            assert!(!list.iter().any(|n| n == banned), "{banned} in {list:?}");
        }
        assert_eq!(list, ["Bluetooth", "Bluetooth Low Energy", "ZigBee", "ANT"]);
    }

    #[test]
    fn suburban_tactical_includes_wifi_ssid() {
        let catalog = builtin_catalog();
        let list = names(&suitable_technologies(CmLayer::WellClear, &EnvironmentPreset::SUBURBAN, &catalog).unwrap());
        assert_eq!(list, ["ADS-B", "RP ADS-B", "Wi-Fi SSID"]);
        let ca = suitable_technologies(CmLayer::CollisionAvoidance, &EnvironmentPreset::SUBURBAN, &catalog).unwrap();
        assert_eq!(names(&ca), list);
    }

    #[test]
    fn strategic_uses_ground_infrastructure() {
        let catalog = builtin_catalog();
        for preset in [EnvironmentPreset::SUBURBAN, EnvironmentPreset::URBAN] {
            let list = names(&suitable_technologies(CmLayer::StrategicDeconfliction, &preset, &catalog).unwrap());
            assert!(list.contains(&"LTE".to_string()) && list.contains(&"LoRa".to_string()));
            assert_eq!(list.len(), 4);
        }
    }

    #[test]
    fn no_conflict_layer_rejected() {
        let catalog = builtin_catalog();
        assert!(suitable_technologies(CmLayer::NoConflict, &EnvironmentPreset::URBAN, &catalog).is_err());
    }

    #[test]
    fn malformed_catalog_rejected() {
        assert!(parse_catalog("name,range_m\nX,abc\n").is_err());
        let bad = "name,range_m,min_update_s,measured_update_min_s,measured_update_max_s,mode\nX,0,,,,ground\n";
        assert!(parse_catalog(bad).is_err());
    }
}
