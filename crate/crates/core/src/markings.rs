//! Parametric road-marking templates and the class palette.
//!
//! Templates are drawn in a local metric frame (`lateral`, `forward`) whose
//! origin is the area centroid of the generated polygon set and whose
//! `+forward` axis follows the driving direction. Every dimension is a named
//! parameter with a UK-flavoured default; see [`TemplateKind::param_specs`].

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GroundPoint;
use crate::polygon::{
    annular_sector, flatten_arc, max_miter_factor, offset_polyline, rectangle, stroke_segment, triangle_outline,
    Bounds, Polygon,
};

/// Class id of the implicit road surface.
pub const BACKGROUND_ID: u8 = 0;

/// The four rare classes every palette must carry.
pub const RARE_CLASSES: [&str; 4] = ["bus_stop", "diagonal_stripes", "warning_triangle", "zigzag"];

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MarkingClass {
    pub id: u8,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    None,
    Zigzag,
    DiagonalStripes,
    BusStop,
    WarningTriangle,
    LaneSeparator,
    DoubleBoundary,
    ParkingSeparator,
    StopLine,
    GiveWayDashes,
    GiveWayTriangle,
    ZebraStripe,
    CrossingDots,
    ArrowStraight,
    ArrowLeft,
    ArrowRight,
    ArrowStraightLeft,
    BoxJunction,
    Chevron,
    CycleSymbol,
    TextSlow,
}

/// Documentation and valid range of one template parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
    pub integer: bool,
    pub unit: &'static str,
    pub doc: &'static str,
}

const fn metres(name: &'static str, default: f64, min: f64, max: f64, doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        default,
        min,
        max,
        integer: false,
        unit: "m",
        doc,
    }
}

const fn count(name: &'static str, default: f64, min: f64, max: f64, doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        default,
        min,
        max,
        integer: true,
        unit: "count",
        doc,
    }
}

const fn degrees(name: &'static str, default: f64, min: f64, max: f64, doc: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        default,
        min,
        max,
        integer: false,
        unit: "deg",
        doc,
    }
}

const FLATTEN: ParamSpec = metres("flatten_tolerance", 0.01, 0.001, 0.1, "maximum chord deviation for curves");

const ZIGZAG: &[ParamSpec] = &[
    metres("stroke_width", 0.1, 0.02, 0.5, "line width"),
    metres("amplitude", 0.45, 0.1, 2.0, "peak-to-peak lateral excursion of each run"),
    metres("half_period", 2.0, 0.5, 6.0, "forward length of one zig or one zag"),
    count("periods", 4.0, 1.0, 16.0, "full zig-zag periods per run"),
    count("configuration", 2.0, 2.0, 3.0, "parallel runs: 2 = dual, 3 = triple"),
    metres("run_spacing", 3.0, 0.8, 6.0, "lateral distance between adjacent runs"),
];

const DIAGONAL_STRIPES: &[ParamSpec] = &[
    metres("width", 2.0, 0.5, 8.0, "lateral width of the hatched area"),
    metres("length", 8.0, 2.0, 40.0, "forward length of the hatched area"),
    metres("border_width", 0.1, 0.05, 0.3, "width of the two boundary lines"),
    metres("stripe_width", 0.3, 0.05, 1.0, "stripe thickness measured across the stripe"),
    metres("stripe_spacing", 1.5, 0.3, 10.0, "forward distance between stripe centres"),
    degrees("angle", 45.0, 10.0, 70.0, "stripe angle against the lateral axis"),
];

const BUS_STOP: &[ParamSpec] = &[
    metres("box_width", 3.2, 2.0, 5.0, "lateral width of the bay outline"),
    metres("box_length", 12.0, 6.0, 40.0, "forward length of the bay outline"),
    metres("line_width", 0.2, 0.05, 0.4, "outline width"),
    metres("letter_height", 1.6, 0.5, 3.0, "glyph extent along forward"),
    metres("letter_width", 0.5, 0.2, 1.0, "glyph extent along lateral"),
    metres("letter_gap", 0.15, 0.05, 0.5, "space between glyphs"),
    metres("stroke_width", 0.1, 0.03, 0.25, "glyph stroke width"),
    metres("line_gap", 0.8, 0.2, 3.0, "forward gap between the two words"),
];

const WARNING_TRIANGLE: &[ParamSpec] = &[
    metres("side", 1.5, 0.2, 5.0, "side length of the equilateral triangle"),
    count("filled", 1.0, 0.0, 1.0, "1 = solid, 0 = outline"),
    metres("stroke_width", 0.15, 0.02, 1.0, "outline width when not filled"),
];

const LANE_SEPARATOR: &[ParamSpec] = &[
    metres("line_width", 0.1, 0.05, 0.3, "dash width"),
    metres("dash_length", 3.0, 0.5, 10.0, "dash length"),
    metres("gap_length", 6.0, 0.5, 20.0, "gap between dashes"),
    count("dashes", 3.0, 1.0, 10.0, "number of dashes"),
];

const DOUBLE_BOUNDARY: &[ParamSpec] = &[
    metres("line_width", 0.1, 0.05, 0.3, "width of each line"),
    metres("separation", 0.2, 0.05, 1.0, "gap between the lines"),
    metres("length", 10.0, 1.0, 50.0, "line length"),
];

const PARKING_SEPARATOR: &[ParamSpec] = &[
    metres("line_width", 0.1, 0.05, 0.3, "line width"),
    metres("stem_length", 2.0, 0.5, 6.0, "length of the bay divider"),
    metres("bar_length", 0.6, 0.2, 2.0, "length of the terminal bar"),
];

const STOP_LINE: &[ParamSpec] = &[
    metres("thickness", 0.3, 0.1, 1.0, "forward thickness"),
    metres("length", 3.5, 0.5, 15.0, "lateral length"),
];

const GIVE_WAY_DASHES: &[ParamSpec] = &[
    metres("dash_length", 0.6, 0.2, 2.0, "lateral dash length"),
    metres("gap_length", 0.3, 0.1, 2.0, "lateral gap"),
    metres("thickness", 0.2, 0.05, 0.6, "forward dash thickness"),
    count("dashes", 6.0, 1.0, 20.0, "dashes per row"),
    count("rows", 2.0, 1.0, 2.0, "number of rows"),
    metres("row_gap", 0.3, 0.1, 1.0, "forward gap between rows"),
];

const GIVE_WAY_TRIANGLE: &[ParamSpec] = &[
    metres("base", 1.5, 0.5, 5.0, "lateral base width"),
    metres("length", 3.75, 1.0, 10.0, "forward length"),
    metres("stroke_width", 0.15, 0.02, 0.4, "outline width"),
];

const ZEBRA_STRIPE: &[ParamSpec] = &[
    metres("stripe_width", 0.5, 0.2, 1.0, "lateral stripe width"),
    metres("gap_length", 0.5, 0.2, 1.0, "lateral gap"),
    metres("stripe_length", 3.0, 1.0, 6.0, "forward stripe length"),
    count("stripes", 6.0, 1.0, 20.0, "number of stripes"),
];

const CROSSING_DOTS: &[ParamSpec] = &[
    metres("dot_size", 0.2, 0.05, 0.6, "square dot side"),
    metres("dot_spacing", 0.6, 0.2, 2.0, "lateral dot pitch"),
    count("dots", 8.0, 1.0, 30.0, "dots per row"),
    count("rows", 2.0, 1.0, 2.0, "number of rows"),
    metres("row_separation", 2.4, 0.5, 6.0, "forward distance between rows"),
];

const ARROW_STRAIGHT: &[ParamSpec] = &[
    metres("length", 6.0, 1.0, 12.0, "tail to tip"),
    metres("shaft_width", 0.15, 0.05, 0.5, "shaft width"),
    metres("head_width", 0.6, 0.2, 2.0, "head base width"),
    metres("head_length", 1.5, 0.3, 4.0, "head length"),
];

const ARROW_TURN: &[ParamSpec] = &[
    metres("shaft_length", 2.5, 0.5, 8.0, "straight part before the bend"),
    metres("turn_radius", 1.0, 0.3, 4.0, "centre-line radius of the bend"),
    metres("arm_length", 0.3, 0.0, 3.0, "straight part after the bend"),
    metres("shaft_width", 0.15, 0.05, 0.5, "shaft width"),
    metres("head_width", 0.6, 0.2, 2.0, "head base width"),
    metres("head_length", 1.0, 0.3, 3.0, "head length"),
    FLATTEN,
];

const ARROW_STRAIGHT_LEFT: &[ParamSpec] = &[
    metres("length", 6.0, 2.0, 12.0, "straight arrow tail to tip"),
    metres("branch_at", 2.0, 0.5, 6.0, "distance from the tail where the left arm leaves"),
    metres("turn_radius", 1.0, 0.3, 4.0, "centre-line radius of the left arm"),
    metres("shaft_width", 0.15, 0.05, 0.5, "shaft width"),
    metres("head_width", 0.6, 0.2, 2.0, "head base width"),
    metres("head_length", 1.0, 0.3, 3.0, "head length"),
    FLATTEN,
];

const BOX_JUNCTION: &[ParamSpec] = &[
    metres("width", 6.0, 2.0, 20.0, "lateral size"),
    metres("length", 6.0, 2.0, 20.0, "forward size"),
    metres("border_width", 0.2, 0.05, 0.4, "outline width"),
    metres("stripe_width", 0.1, 0.05, 0.3, "diagonal width"),
    metres("stripe_spacing", 1.5, 0.5, 5.0, "perpendicular distance between diagonals"),
];

const CHEVRON: &[ParamSpec] = &[
    count("count", 3.0, 1.0, 10.0, "number of chevrons"),
    metres("spacing", 2.0, 0.5, 10.0, "forward distance between chevrons"),
    metres("arm_length", 1.5, 0.3, 4.0, "length of each arm"),
    degrees("angle", 45.0, 20.0, 80.0, "angle between each arm and the forward axis"),
    metres("stroke_width", 0.2, 0.05, 0.5, "line width"),
];

const CYCLE_SYMBOL: &[ParamSpec] = &[
    metres("wheelbase", 1.1, 0.5, 2.5, "distance between wheel centres"),
    metres("wheel_radius", 0.35, 0.15, 0.8, "outer wheel radius"),
    metres("stroke_width", 0.08, 0.03, 0.2, "line width"),
    FLATTEN,
];

const TEXT_SLOW: &[ParamSpec] = &[
    metres("letter_height", 1.6, 0.5, 3.0, "glyph extent along forward"),
    metres("letter_width", 0.5, 0.2, 1.0, "glyph extent along lateral"),
    metres("letter_gap", 0.15, 0.05, 0.5, "space between glyphs"),
    metres("stroke_width", 0.1, 0.03, 0.25, "glyph stroke width"),
];

impl TemplateKind {
    pub const ALL: [TemplateKind; 21] = [
        TemplateKind::None,
        TemplateKind::Zigzag,
        TemplateKind::DiagonalStripes,
        TemplateKind::BusStop,
        TemplateKind::WarningTriangle,
        TemplateKind::LaneSeparator,
        TemplateKind::DoubleBoundary,
        TemplateKind::ParkingSeparator,
        TemplateKind::StopLine,
        TemplateKind::GiveWayDashes,
        TemplateKind::GiveWayTriangle,
        TemplateKind::ZebraStripe,
        TemplateKind::CrossingDots,
        TemplateKind::ArrowStraight,
        TemplateKind::ArrowLeft,
        TemplateKind::ArrowRight,
        TemplateKind::ArrowStraightLeft,
        TemplateKind::BoxJunction,
        TemplateKind::Chevron,
        TemplateKind::CycleSymbol,
        TemplateKind::TextSlow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::None => "none",
            TemplateKind::Zigzag => "zigzag",
            TemplateKind::DiagonalStripes => "diagonal_stripes",
            TemplateKind::BusStop => "bus_stop",
            TemplateKind::WarningTriangle => "warning_triangle",
            TemplateKind::LaneSeparator => "lane_separator",
            TemplateKind::DoubleBoundary => "double_boundary",
            TemplateKind::ParkingSeparator => "parking_separator",
            TemplateKind::StopLine => "stop_line",
            TemplateKind::GiveWayDashes => "give_way_dashes",
            TemplateKind::GiveWayTriangle => "give_way_triangle",
            TemplateKind::ZebraStripe => "zebra_stripe",
            TemplateKind::CrossingDots => "crossing_dots",
            TemplateKind::ArrowStraight => "arrow_straight",
            TemplateKind::ArrowLeft => "arrow_left",
            TemplateKind::ArrowRight => "arrow_right",
            TemplateKind::ArrowStraightLeft => "arrow_straight_left",
            TemplateKind::BoxJunction => "box_junction",
            TemplateKind::Chevron => "chevron",
            TemplateKind::CycleSymbol => "cycle_symbol",
            TemplateKind::TextSlow => "text_slow",
        }
    }

    pub fn param_specs(self) -> &'static [ParamSpec] {
        match self {
            TemplateKind::None => &[],
            TemplateKind::Zigzag => ZIGZAG,
            TemplateKind::DiagonalStripes => DIAGONAL_STRIPES,
            TemplateKind::BusStop => BUS_STOP,
            TemplateKind::WarningTriangle => WARNING_TRIANGLE,
            TemplateKind::LaneSeparator => LANE_SEPARATOR,
            TemplateKind::DoubleBoundary => DOUBLE_BOUNDARY,
            TemplateKind::ParkingSeparator => PARKING_SEPARATOR,
            TemplateKind::StopLine => STOP_LINE,
            TemplateKind::GiveWayDashes => GIVE_WAY_DASHES,
            TemplateKind::GiveWayTriangle => GIVE_WAY_TRIANGLE,
            TemplateKind::ZebraStripe => ZEBRA_STRIPE,
            TemplateKind::CrossingDots => CROSSING_DOTS,
            TemplateKind::ArrowStraight => ARROW_STRAIGHT,
            TemplateKind::ArrowLeft | TemplateKind::ArrowRight => ARROW_TURN,
            TemplateKind::ArrowStraightLeft => ARROW_STRAIGHT_LEFT,
            TemplateKind::BoxJunction => BOX_JUNCTION,
            TemplateKind::Chevron => CHEVRON,
            TemplateKind::CycleSymbol => CYCLE_SYMBOL,
            TemplateKind::TextSlow => TEXT_SLOW,
        }
    }

    pub fn default_params(self) -> Params {
        self.param_specs()
            .iter()
            .map(|s| (s.name.to_string(), s.default))
            .collect()
    }

    /// Merge `overrides` over the template defaults and range-check the result.
    pub fn resolve_params(self, overrides: &Params) -> Result<Params> {
        let specs = self.param_specs();
        let mut out = self.default_params();
        for (name, &value) in overrides {
            let spec = specs
                .iter()
                .find(|s| s.name == name)
                .ok_or_else(|| Error::UnknownParam {
                    template: self.name().to_string(),
                    param: name.clone(),
                })?;
            let ok = value.is_finite()
                && value >= spec.min
                && value <= spec.max
                && (!spec.integer || value.fract() == 0.0);
            if !ok {
                return Err(Error::ParamOutOfRange {
                    param: name.clone(),
                    value,
                    min: spec.min,
                    max: spec.max,
                });
            }
            out.insert(name.clone(), value);
        }
        Ok(out)
    }

    /// Full nominal size (lateral, forward) of the drawn marking.
    ///
    /// With the origin at the area centroid, every vertex lies inside
    /// `[-width, width] x [-length, length]`; see [`Self::bounding_box`].
    pub fn extent(self, p: &Params) -> (f64, f64) {
        let g = |k: &str| p[k];
        match self {
            TemplateKind::None => (0.0, 0.0),
            TemplateKind::Zigzag => {
                let runs = g("configuration") - 1.0;
                // Mitres are capped at 4x half-width by generation.
                (
                    runs * g("run_spacing") + g("amplitude") + 4.0 * g("stroke_width"),
                    2.0 * g("periods") * g("half_period") + 4.0 * g("stroke_width"),
                )
            }
            TemplateKind::DiagonalStripes => (g("width"), g("length")),
            TemplateKind::BusStop => (g("box_width"), g("box_length")),
            TemplateKind::WarningTriangle => (g("side"), g("side") * 3f64.sqrt() / 2.0),
            TemplateKind::LaneSeparator => (
                g("line_width"),
                g("dashes") * g("dash_length") + (g("dashes") - 1.0) * g("gap_length"),
            ),
            TemplateKind::DoubleBoundary => (2.0 * g("line_width") + g("separation"), g("length")),
            TemplateKind::ParkingSeparator => (g("bar_length").max(g("line_width")), g("stem_length")),
            TemplateKind::StopLine => (g("length"), g("thickness")),
            TemplateKind::GiveWayDashes => (
                g("dashes") * g("dash_length") + (g("dashes") - 1.0) * g("gap_length"),
                g("rows") * g("thickness") + (g("rows") - 1.0) * g("row_gap"),
            ),
            TemplateKind::GiveWayTriangle => (g("base"), g("length")),
            TemplateKind::ZebraStripe => (
                g("stripes") * g("stripe_width") + (g("stripes") - 1.0) * g("gap_length"),
                g("stripe_length"),
            ),
            TemplateKind::CrossingDots => (
                (g("dots") - 1.0) * g("dot_spacing") + g("dot_size"),
                (g("rows") - 1.0) * g("row_separation") + g("dot_size"),
            ),
            TemplateKind::ArrowStraight => (g("head_width"), g("length")),
            TemplateKind::ArrowLeft | TemplateKind::ArrowRight => {
                let reach = g("turn_radius") + g("arm_length") + g("head_length");
                (
                    reach + g("shaft_width"),
                    g("shaft_length") + g("turn_radius") + 0.5 * g("head_width").max(g("shaft_width")),
                )
            }
            TemplateKind::ArrowStraightLeft => {
                let reach = g("turn_radius") + g("head_length");
                (
                    reach + 0.5 * g("head_width").max(g("shaft_width")),
                    g("length").max(g("branch_at") + g("turn_radius") + 0.5 * g("head_width")),
                )
            }
            TemplateKind::BoxJunction => (
                g("width") + 2.0 * g("stripe_width"),
                g("length") + 2.0 * g("stripe_width"),
            ),
            TemplateKind::Chevron => {
                let a = g("angle").to_radians();
                let reach = g("arm_length") * a.sin();
                let drop = g("arm_length") * a.cos();
                let miter = g("stroke_width") / a.sin();
                (
                    2.0 * reach + 2.0 * g("stroke_width"),
                    (g("count") - 1.0) * g("spacing") + drop + miter + g("stroke_width"),
                )
            }
            TemplateKind::CycleSymbol => (
                2.0 * g("wheel_radius") + 0.8 * g("wheelbase"),
                g("wheelbase") + 2.0 * g("wheel_radius"),
            ),
            TemplateKind::TextSlow => (
                4.0 * g("letter_width") + 3.0 * g("letter_gap") + g("stroke_width"),
                g("letter_height") + g("stroke_width"),
            ),
        }
    }

    /// Documented bounding box of the centred polygon set.
    pub fn bounding_box(self, p: &Params) -> Bounds {
        let (w, l) = self.extent(p);
        Bounds {
            min_lateral: -w,
            max_lateral: w,
            min_forward: -l,
            max_forward: l,
        }
    }

    /// Generate the template polygons for fully resolved parameters, centred
    /// on their area centroid.
    pub fn generate(self, p: &Params) -> Result<Vec<Polygon>> {
        let raw = match self {
            TemplateKind::None => {
                return Err(Error::InvalidConfig("the background class has no marking template".into()))
            }
            TemplateKind::Zigzag => zigzag(p)?,
            TemplateKind::DiagonalStripes => diagonal_stripes(p)?,
            TemplateKind::BusStop => bus_stop(p)?,
            TemplateKind::WarningTriangle => warning_triangle(p)?,
            TemplateKind::LaneSeparator => lane_separator(p),
            TemplateKind::DoubleBoundary => double_boundary(p),
            TemplateKind::ParkingSeparator => parking_separator(p),
            TemplateKind::StopLine => vec![rectangle(GroundPoint::default(), p["length"], p["thickness"])],
            TemplateKind::GiveWayDashes => give_way_dashes(p),
            TemplateKind::GiveWayTriangle => give_way_triangle(p)?,
            TemplateKind::ZebraStripe => zebra(p),
            TemplateKind::CrossingDots => crossing_dots(p),
            TemplateKind::ArrowStraight => vec![straight_arrow(p["length"], p["shaft_width"], p["head_width"], p["head_length"])],
            TemplateKind::ArrowLeft => turn_arrow(p),
            TemplateKind::ArrowRight => turn_arrow(p).iter().map(Polygon::mirrored_lateral).collect(),
            TemplateKind::ArrowStraightLeft => straight_left_arrow(p),
            TemplateKind::BoxJunction => box_junction(p),
            TemplateKind::Chevron => chevrons(p),
            TemplateKind::CycleSymbol => cycle_symbol(p),
            TemplateKind::TextSlow => text_line(
                "SLOW",
                GroundPoint::default(),
                p["letter_width"],
                p["letter_height"],
                p["letter_gap"],
                p["stroke_width"],
            ),
        };
        if let Some(bad) = raw.iter().position(|poly| !poly.is_valid()) {
            return Err(Error::InvalidConfig(format!(
                "template `{}` produced an invalid polygon (#{bad}) for these parameters",
                self.name()
            )));
        }
        Ok(center_on_centroid(raw))
    }
}

fn center_on_centroid(polys: Vec<Polygon>) -> Vec<Polygon> {
    let c = set_centroid(&polys);
    let shift = GroundPoint::new(-c.lateral, -c.forward);
    polys.iter().map(|p| p.translated(shift)).collect()
}

/// Area-weighted centroid of a polygon set.
pub fn set_centroid(polys: &[Polygon]) -> GroundPoint {
    let (mut ax, mut ay, mut total) = (0.0, 0.0, 0.0);
    for p in polys {
        let a = p.area();
        let c = p.centroid();
        ax += a * c.lateral;
        ay += a * c.forward;
        total += a;
    }
    if total == 0.0 {
        GroundPoint::default()
    } else {
        GroundPoint::new(ax / total, ay / total)
    }
}

fn gp(lateral: f64, forward: f64) -> GroundPoint {
    GroundPoint::new(lateral, forward)
}

/// Centre-line vertices of one zigzag run, starting and ending on the
/// negative-lateral side.
pub fn zigzag_centerline(base_lateral: f64, amplitude: f64, half_period: f64, periods: usize) -> Vec<GroundPoint> {
    let segments = 2 * periods;
    let start = -0.5 * segments as f64 * half_period;
    (0..=segments)
        .map(|k| {
            let side = if k % 2 == 0 { -0.5 } else { 0.5 };
            gp(base_lateral + side * amplitude, start + k as f64 * half_period)
        })
        .collect()
}

fn zigzag(p: &Params) -> Result<Vec<Polygon>> {
    let runs = p["configuration"] as usize;
    let periods = p["periods"] as usize;
    let mut out = Vec::with_capacity(runs);
    for r in 0..runs {
        let base = (r as f64 - 0.5 * (runs as f64 - 1.0)) * p["run_spacing"];
        let line = zigzag_centerline(base, p["amplitude"], p["half_period"], periods);
        if max_miter_factor(&line) > 4.0 {
            return Err(Error::InvalidConfig("zigzag turns too sharp for a mitred stroke".into()));
        }
        out.push(offset_polyline(&line, p["stroke_width"]));
    }
    Ok(out)
}

fn diagonal_stripes(p: &Params) -> Result<Vec<Polygon>> {
    let (w, l, bw) = (p["width"], p["length"], p["border_width"]);
    let angle = p["angle"].to_radians();
    let slope = angle.tan();
    let inner = 0.5 * w - bw;
    // Forward thickness of a stripe of the given perpendicular width.
    let thick = p["stripe_width"] / angle.cos();
    let reach = 0.5 * thick + slope * inner;
    let usable = l - 2.0 * reach;
    if inner <= 0.0 || usable < 0.0 {
        return Err(Error::InvalidConfig("hatched area too small for its stripes".into()));
    }
    let n = (usable / p["stripe_spacing"]).floor() as usize + 1;
    let mut out = vec![
        rectangle(gp(-0.5 * w + 0.5 * bw, 0.0), bw, l),
        rectangle(gp(0.5 * w - 0.5 * bw, 0.0), bw, l),
    ];
    for j in 0..n {
        let c = (j as f64 - 0.5 * (n as f64 - 1.0)) * p["stripe_spacing"];
        out.push(Polygon::new(vec![
            gp(-inner, c - 0.5 * thick - slope * inner),
            gp(inner, c - 0.5 * thick + slope * inner),
            gp(inner, c + 0.5 * thick + slope * inner),
            gp(-inner, c + 0.5 * thick - slope * inner),
        ]));
    }
    Ok(out)
}

/// Glyph strokes on a 4 x 6 grid (x right, y up).
fn glyph(c: char) -> &'static [&'static [(f64, f64)]] {
    match c {
        'B' => &[
            &[(0.0, 0.0), (0.0, 6.0)],
            &[(0.0, 6.0), (3.0, 6.0), (4.0, 5.0), (4.0, 4.0), (3.0, 3.0), (0.0, 3.0)],
            &[(3.0, 3.0), (4.0, 2.0), (4.0, 1.0), (3.0, 0.0), (0.0, 0.0)],
        ],
        'U' => &[&[(0.0, 6.0), (0.0, 1.0), (1.0, 0.0), (3.0, 0.0), (4.0, 1.0), (4.0, 6.0)]],
        'S' => &[&[
            (4.0, 5.0),
            (3.0, 6.0),
            (1.0, 6.0),
            (0.0, 5.0),
            (0.0, 4.0),
            (1.0, 3.0),
            (3.0, 3.0),
            (4.0, 2.0),
            (4.0, 1.0),
            (3.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
        ]],
        'T' => &[&[(0.0, 6.0), (4.0, 6.0)], &[(2.0, 6.0), (2.0, 0.0)]],
        'O' => &[&[
            (1.0, 0.0),
            (0.0, 1.0),
            (0.0, 5.0),
            (1.0, 6.0),
            (3.0, 6.0),
            (4.0, 5.0),
            (4.0, 1.0),
            (3.0, 0.0),
            (1.0, 0.0),
        ]],
        'P' => &[&[(0.0, 0.0), (0.0, 6.0), (3.0, 6.0), (4.0, 5.0), (4.0, 4.0), (3.0, 3.0), (0.0, 3.0)]],
        'L' => &[&[(0.0, 6.0), (0.0, 0.0), (4.0, 0.0)]],
        'W' => &[&[(0.0, 6.0), (1.0, 0.0), (2.0, 3.0), (3.0, 0.0), (4.0, 6.0)]],
        _ => &[],
    }
}

/// Polygons for a line of text centred at `center`; glyph x runs along
/// lateral and glyph height along forward.
fn text_line(text: &str, center: GroundPoint, width: f64, height: f64, gap: f64, stroke: f64) -> Vec<Polygon> {
    let n = text.chars().count() as f64;
    let total = n * width + (n - 1.0) * gap;
    let (sx, sy) = (width / 4.0, height / 6.0);
    let mut out = Vec::new();
    for (i, ch) in text.chars().enumerate() {
        let left = center.lateral - 0.5 * total + i as f64 * (width + gap);
        let bottom = center.forward - 0.5 * height;
        for line in glyph(ch) {
            for seg in line.windows(2) {
                let a = gp(left + seg[0].0 * sx, bottom + seg[0].1 * sy);
                let b = gp(left + seg[1].0 * sx, bottom + seg[1].1 * sy);
                out.push(stroke_segment(a, b, stroke, true));
            }
        }
    }
    out
}

fn bus_stop(p: &Params) -> Result<Vec<Polygon>> {
    let (w, l, lw) = (p["box_width"], p["box_length"], p["line_width"]);
    let (lh, lwid, lg, sw) = (p["letter_height"], p["letter_width"], p["letter_gap"], p["stroke_width"]);
    let stop_width = 4.0 * lwid + 3.0 * lg + sw;
    let text_length = 2.0 * lh + p["line_gap"] + sw;
    if stop_width > w - 2.0 * lw || text_length > l - 2.0 * lw {
        return Err(Error::InvalidConfig("bus stop lettering does not fit its bay".into()));
    }
    let mut out = vec![
        rectangle(gp(-0.5 * w + 0.5 * lw, 0.0), lw, l),
        rectangle(gp(0.5 * w - 0.5 * lw, 0.0), lw, l),
        rectangle(gp(0.0, -0.5 * l + 0.5 * lw), w - 2.0 * lw, lw),
        rectangle(gp(0.0, 0.5 * l - 0.5 * lw), w - 2.0 * lw, lw),
    ];
    let offset = 0.5 * (lh + p["line_gap"]);
    out.extend(text_line("BUS", gp(0.0, -offset), lwid, lh, lg, sw));
    out.extend(text_line("STOP", gp(0.0, offset), lwid, lh, lg, sw));
    Ok(out)
}

/// Triangle with its apex pointing toward the camera (-forward).
fn apex_down_triangle(base: f64, length: f64) -> [GroundPoint; 3] {
    [gp(0.0, -0.5 * length), gp(0.5 * base, 0.5 * length), gp(-0.5 * base, 0.5 * length)]
}

fn warning_triangle(p: &Params) -> Result<Vec<Polygon>> {
    let side = p["side"];
    let tri = apex_down_triangle(side, side * 3f64.sqrt() / 2.0);
    if p["filled"] >= 1.0 {
        return Ok(vec![Polygon::new(tri.to_vec())]);
    }
    triangle_outline(tri, p["stroke_width"])
        .ok_or_else(|| Error::InvalidConfig("triangle stroke wider than its inradius".into()))
}

fn give_way_triangle(p: &Params) -> Result<Vec<Polygon>> {
    triangle_outline(apex_down_triangle(p["base"], p["length"]), p["stroke_width"])
        .ok_or_else(|| Error::InvalidConfig("triangle stroke wider than its inradius".into()))
}

fn lane_separator(p: &Params) -> Vec<Polygon> {
    let n = p["dashes"] as usize;
    let pitch = p["dash_length"] + p["gap_length"];
    (0..n)
        .map(|i| {
            let c = (i as f64 - 0.5 * (n as f64 - 1.0)) * pitch;
            rectangle(gp(0.0, c), p["line_width"], p["dash_length"])
        })
        .collect()
}

fn double_boundary(p: &Params) -> Vec<Polygon> {
    let off = 0.5 * (p["line_width"] + p["separation"]);
    vec![
        rectangle(gp(-off, 0.0), p["line_width"], p["length"]),
        rectangle(gp(off, 0.0), p["line_width"], p["length"]),
    ]
}

fn parking_separator(p: &Params) -> Vec<Polygon> {
    let (lw, stem) = (p["line_width"], p["stem_length"]);
    vec![
        rectangle(gp(0.0, -0.5 * lw), lw, stem - lw),
        rectangle(gp(0.0, 0.5 * stem - 0.5 * lw), p["bar_length"].max(lw), lw),
    ]
}

fn give_way_dashes(p: &Params) -> Vec<Polygon> {
    let n = p["dashes"] as usize;
    let rows = p["rows"] as usize;
    let pitch = p["dash_length"] + p["gap_length"];
    let row_pitch = p["thickness"] + p["row_gap"];
    let mut out = Vec::new();
    for r in 0..rows {
        let y = (r as f64 - 0.5 * (rows as f64 - 1.0)) * row_pitch;
        for i in 0..n {
            let x = (i as f64 - 0.5 * (n as f64 - 1.0)) * pitch;
            out.push(rectangle(gp(x, y), p["dash_length"], p["thickness"]));
        }
    }
    out
}

fn zebra(p: &Params) -> Vec<Polygon> {
    let n = p["stripes"] as usize;
    let pitch = p["stripe_width"] + p["gap_length"];
    (0..n)
        .map(|i| {
            let x = (i as f64 - 0.5 * (n as f64 - 1.0)) * pitch;
            rectangle(gp(x, 0.0), p["stripe_width"], p["stripe_length"])
        })
        .collect()
}

fn crossing_dots(p: &Params) -> Vec<Polygon> {
    let n = p["dots"] as usize;
    let rows = p["rows"] as usize;
    let s = p["dot_size"];
    let mut out = Vec::new();
    for r in 0..rows {
        let y = (r as f64 - 0.5 * (rows as f64 - 1.0)) * p["row_separation"];
        for i in 0..n {
            let x = (i as f64 - 0.5 * (n as f64 - 1.0)) * p["dot_spacing"];
            out.push(rectangle(gp(x, y), s, s));
        }
    }
    out
}

/// Seven-vertex arrow pointing along +forward, tail at `-length/2`.
fn straight_arrow(length: f64, shaft: f64, head_width: f64, head_length: f64) -> Polygon {
    let (tail, tip) = (-0.5 * length, 0.5 * length);
    let neck = tip - head_length.min(length);
    let (hs, hh) = (0.5 * shaft, 0.5 * head_width.max(shaft));
    Polygon::new(vec![
        gp(-hs, tail),
        gp(hs, tail),
        gp(hs, neck),
        gp(hh, neck),
        gp(0.0, tip),
        gp(-hh, neck),
        gp(-hs, neck),
    ])
}

/// Shaft centre-line of a left-turning arm starting at `origin` heading
/// +forward, and the heading (unit vector) at its end.
fn left_turn_centerline(
    origin: GroundPoint,
    straight: f64,
    radius: f64,
    arm: f64,
    tolerance: f64,
) -> Vec<GroundPoint> {
    let bend_start = gp(origin.lateral, origin.forward + straight);
    let center = gp(bend_start.lateral - radius, bend_start.forward);
    let mut line = vec![origin];
    if straight <= 0.0 {
        line.clear();
    }
    line.extend(flatten_arc(center, radius, 0.0, FRAC_PI_2, tolerance));
    let end = *line.last().expect("arc has points");
    if arm > 0.0 {
        line.push(gp(end.lateral - arm, end.forward));
    }
    line
}

/// Arrow head pointing along -lateral with its base centred on `base`.
fn left_head(base: GroundPoint, width: f64, length: f64) -> Polygon {
    Polygon::new(vec![
        gp(base.lateral, base.forward - 0.5 * width),
        gp(base.lateral, base.forward + 0.5 * width),
        gp(base.lateral - length, base.forward),
    ])
}

fn turn_arrow(p: &Params) -> Vec<Polygon> {
    let line = left_turn_centerline(
        gp(0.0, 0.0),
        p["shaft_length"],
        p["turn_radius"],
        p["arm_length"],
        p["flatten_tolerance"],
    );
    let end = *line.last().expect("non-empty centre-line");
    vec![
        offset_polyline(&line, p["shaft_width"]),
        left_head(end, p["head_width"].max(p["shaft_width"]), p["head_length"]),
    ]
}

fn straight_left_arrow(p: &Params) -> Vec<Polygon> {
    let length = p["length"];
    let branch = (-0.5 * length + p["branch_at"]).min(0.5 * length - p["head_length"]);
    let arm = left_turn_centerline(gp(0.0, branch), 0.0, p["turn_radius"], 0.0, p["flatten_tolerance"]);
    let end = *arm.last().expect("non-empty arc");
    vec![
        straight_arrow(length, p["shaft_width"], p["head_width"], p["head_length"]),
        offset_polyline(&arm, p["shaft_width"]),
        left_head(end, p["head_width"].max(p["shaft_width"]), p["head_length"]),
    ]
}

/// Clip the infinite line through `p0` with direction `d` to the rectangle
/// `|x| <= hw, |y| <= hl` (Liang-Barsky).
fn clip_line(p0: GroundPoint, d: (f64, f64), hw: f64, hl: f64) -> Option<(GroundPoint, GroundPoint)> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for (p, q) in [
        (-d.0, p0.lateral + hw),
        (d.0, hw - p0.lateral),
        (-d.1, p0.forward + hl),
        (d.1, hl - p0.forward),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
        }
    }
    (t0 < t1).then(|| {
        (
            gp(p0.lateral + t0 * d.0, p0.forward + t0 * d.1),
            gp(p0.lateral + t1 * d.0, p0.forward + t1 * d.1),
        )
    })
}

fn box_junction(p: &Params) -> Vec<Polygon> {
    let (w, l, bw, sw) = (p["width"], p["length"], p["border_width"], p["stripe_width"]);
    let mut out = vec![
        rectangle(gp(-0.5 * w + 0.5 * bw, 0.0), bw, l),
        rectangle(gp(0.5 * w - 0.5 * bw, 0.0), bw, l),
        rectangle(gp(0.0, -0.5 * l + 0.5 * bw), w - 2.0 * bw, bw),
        rectangle(gp(0.0, 0.5 * l - 0.5 * bw), w - 2.0 * bw, bw),
    ];
    let (hw, hl) = (0.5 * w - bw, 0.5 * l - bw);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let max_k = ((hw + hl) * s / p["stripe_spacing"]).ceil() as i64;
    for dir in [(s, s), (s, -s)] {
        let normal = (-dir.1, dir.0);
        for k in -max_k..=max_k {
            let off = k as f64 * p["stripe_spacing"];
            let origin = gp(normal.0 * off, normal.1 * off);
            if let Some((a, b)) = clip_line(origin, dir, hw, hl) {
                if a.distance(&b) > sw {
                    out.push(stroke_segment(a, b, sw, false));
                }
            }
        }
    }
    out
}

fn chevrons(p: &Params) -> Vec<Polygon> {
    let n = p["count"] as usize;
    let a = p["angle"].to_radians();
    let (reach, drop) = (p["arm_length"] * a.sin(), p["arm_length"] * a.cos());
    (0..n)
        .map(|i| {
            let y = (i as f64 - 0.5 * (n as f64 - 1.0)) * p["spacing"];
            let line = [gp(-reach, y - drop), gp(0.0, y), gp(reach, y - drop)];
            offset_polyline(&line, p["stroke_width"])
        })
        .collect()
}

fn cycle_symbol(p: &Params) -> Vec<Polygon> {
    let (wb, r, sw, tol) = (p["wheelbase"], p["wheel_radius"], p["stroke_width"], p["flatten_tolerance"]);
    // Side view with the bike's "up" drawn toward -lateral.
    let side = |along: f64, up: f64| gp(-up * wb, along * wb);
    let rear = side(-0.5, 0.0);
    let front = side(0.5, 0.0);
    let crank = side(-0.05, 0.0);
    let seat = side(-0.2, 0.45);
    let head = side(0.3, 0.45);
    let bar = side(0.38, 0.55);
    let mut out = Vec::new();
    for hub in [rear, front] {
        out.push(annular_sector(hub, r - sw, r, 0.0, PI, tol));
        out.push(annular_sector(hub, r - sw, r, PI, 2.0 * PI, tol));
    }
    for (a, b) in [(rear, crank), (crank, seat), (seat, rear), (seat, head), (crank, head), (head, front), (head, bar)] {
        out.push(stroke_segment(a, b, sw, true));
    }
    out
}

/// One palette entry as stored in a palette file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaletteEntry {
    pub id: u8,
    pub name: String,
    pub template: TemplateKind,
    #[serde(default)]
    pub default_params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Palette {
    pub entries: Vec<PaletteEntry>,
}

const BUILTIN_NAMES: [&str; 21] = [
    "background",
    "zigzag",
    "diagonal_stripes",
    "bus_stop",
    "warning_triangle",
    "lane_separator",
    "double_boundary",
    "parking_separator",
    "stop_line",
    "give_way_dashes",
    "give_way_triangle",
    "zebra_stripe",
    "crossing_dots",
    "arrow_straight",
    "arrow_left",
    "arrow_right",
    "arrow_straight_left",
    "box_junction",
    "chevron",
    "cycle_symbol",
    "text_slow",
];

/// Background plus the 20 default marking classes, ids 0..=20.
pub fn builtin_palette() -> Vec<MarkingClass> {
    Palette::builtin().classes()
}

impl Palette {
    pub fn builtin() -> Self {
        let entries = BUILTIN_NAMES
            .iter()
            .zip(TemplateKind::ALL)
            .enumerate()
            .map(|(id, (name, template))| PaletteEntry {
                id: id as u8,
                name: name.to_string(),
                template,
                default_params: Params::new(),
            })
            .collect();
        Self { entries }
    }

    pub fn from_entries(entries: Vec<PaletteEntry>) -> Result<Self> {
        let palette = Self { entries };
        palette.validate()?;
        Ok(palette)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        let mut names = std::collections::BTreeSet::new();
        for e in &self.entries {
            if !ids.insert(e.id) {
                return Err(Error::InvalidPalette(format!("duplicate id {}", e.id)));
            }
            if !names.insert(e.name.as_str()) {
                return Err(Error::InvalidPalette(format!("duplicate name `{}`", e.name)));
            }
            if (e.id == BACKGROUND_ID) != (e.template == TemplateKind::None) {
                return Err(Error::InvalidPalette(format!(
                    "class `{}`: id 0 is reserved for the template-less background",
                    e.name
                )));
            }
            e.template.resolve_params(&e.default_params)?;
        }
        if !ids.contains(&BACKGROUND_ID) {
            return Err(Error::InvalidPalette("missing background class (id 0)".into()));
        }
        for rare in RARE_CLASSES {
            if !names.contains(rare) {
                return Err(Error::InvalidPalette(format!("missing required class `{rare}`")));
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> Vec<MarkingClass> {
        self.entries
            .iter()
            .map(|e| MarkingClass {
                id: e.id,
                name: e.name.clone(),
            })
            .collect()
    }

    /// Ids of every non-background class.
    pub fn marking_ids(&self) -> Vec<u8> {
        self.entries
            .iter()
            .filter(|e| e.id != BACKGROUND_ID)
            .map(|e| e.id)
            .collect()
    }

    pub fn max_id(&self) -> u8 {
        self.entries.iter().map(|e| e.id).max().unwrap_or(0)
    }

    pub fn by_name(&self, name: &str) -> Result<&PaletteEntry> {
        self.entries
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn by_id(&self, id: u8) -> Result<&PaletteEntry> {
        self.entries
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| Error::UnknownClass(id.to_string()))
    }

    pub fn name_of(&self, id: u8) -> Option<&str> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.name.as_str())
    }
}

/// Placement of a marking on the road plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkingPose {
    pub anchor: GroundPoint,
    /// Radians in (-pi, pi], counter-clockwise viewed from above.
    pub yaw: f64,
}

impl MarkingPose {
    pub fn new(anchor: GroundPoint, yaw: f64) -> Self {
        Self {
            anchor,
            yaw: normalize_angle(yaw),
        }
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkingInstance {
    pub class: MarkingClass,
    pub template: TemplateKind,
    pub params: Params,
    /// Polygons in the local metric frame.
    pub polygons: Vec<Polygon>,
    pub pose: MarkingPose,
}

/// Instantiate `class` (by name) with palette defaults, then `overrides`.
pub fn instantiate(palette: &Palette, class: &str, overrides: &Params, pose: MarkingPose) -> Result<MarkingInstance> {
    let entry = palette.by_name(class)?;
    let mut merged = entry.default_params.clone();
    merged.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
    let params = entry.template.resolve_params(&merged)?;
    let polygons = entry.template.generate(&params)?;
    Ok(MarkingInstance {
        class: MarkingClass {
            id: entry.id,
            name: entry.name.clone(),
        },
        template: entry.template,
        params,
        polygons,
        pose: MarkingPose::new(pose.anchor, pose.yaw),
    })
}

/// Rotate by the pose yaw, then translate to the anchor.
pub fn transform_to_ground(instance: &MarkingInstance) -> Vec<Polygon> {
    instance
        .polygons
        .iter()
        .map(|p| p.rotated(instance.pose.yaw).translated(instance.pose.anchor))
        .collect()
}
