//! TSPLIB95 / CVRPLIB `.vrp` instances and `.sol` solution files.

use std::fmt::{self, Write as _};
use std::path::Path;

use anyhow::Context;
use ctr3_core::{DistanceMatrix, DistancePolicy, Instance, InstanceError, Point, Route, Solution};

#[derive(Debug, Clone, PartialEq)]
pub enum VrpError {
    /// Malformed input; `line` is 1-based.
    Syntax { line: usize, message: String },
    /// Well-formed file describing an unusable instance.
    Instance(InstanceError),
}

impl fmt::Display for VrpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VrpError::Syntax { line, message } => write!(f, "line {line}: {message}"),
            VrpError::Instance(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for VrpError {}

fn syntax(line: usize, message: impl Into<String>) -> VrpError {
    VrpError::Syntax { line, message: message.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VrpFile {
    pub instance: Instance,
    /// File node id of every internal id (depot first).
    pub node_ids: Vec<usize>,
    pub comment: Option<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Header,
    Coords,
    Demands,
    Depots,
    Done,
}

fn number<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, VrpError> {
    tok.parse().map_err(|_| syntax(line, format!("bad {what} `{tok}`")))
}

/// Optimum or best value quoted in a CVRPLIB comment such as
/// `(Augerat et al, No of trucks: 5, Optimal value: 784)`.
pub fn value_from_comment(comment: &str) -> Option<f64> {
    let lower = comment.to_ascii_lowercase();
    for key in ["optimal value", "best value"] {
        if let Some(i) = lower.find(key) {
            let rest = comment[i + key.len()..].trim_start_matches([':', ' ', '=']);
            let digits: String = rest.chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect();
            if let Ok(v) = digits.parse() {
                return Some(v);
            }
        }
    }
    None
}

/// Parses a `.vrp` file with EUC_2D coordinates. The depot becomes id 0 and
/// the remaining nodes ids `1..=N` in file order.
pub fn parse_vrp(text: &str, policy: DistancePolicy) -> Result<VrpFile, VrpError> {
    let mut name = None;
    let mut comment = None;
    let mut dimension: Option<usize> = None;
    let mut capacity: Option<f64> = None;
    let mut coords: Vec<Option<Point>> = Vec::new();
    let mut demands: Vec<Option<f64>> = Vec::new();
    let mut depots: Vec<usize> = Vec::new();
    let mut section = Section::Header;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let upper = s.to_ascii_uppercase();
        match upper.split([' ', ':', '\t']).next().unwrap_or("") {
            "NODE_COORD_SECTION" | "DEMAND_SECTION" | "DEPOT_SECTION" => {
                let dim = dimension.ok_or_else(|| syntax(line, "section before DIMENSION"))?;
                if coords.is_empty() {
                    coords = vec![None; dim + 1];
                    demands = vec![None; dim + 1];
                }
                section = match &upper[..] {
                    u if u.starts_with("NODE") => Section::Coords,
                    u if u.starts_with("DEMAND") => Section::Demands,
                    _ => Section::Depots,
                };
                continue;
            }
            "EOF" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Header => {
                let (key, value) = s
                    .split_once(':')
                    .ok_or_else(|| syntax(line, format!("expected `KEY : VALUE`, got `{s}`")))?;
                let value = value.trim();
                match key.trim().to_ascii_uppercase().as_str() {
                    "NAME" => name = Some(value.to_string()),
                    "COMMENT" => comment = Some(value.to_string()),
                    "TYPE" if !value.eq_ignore_ascii_case("CVRP") => {
                        return Err(syntax(line, format!("unsupported TYPE {value}")));
                    }
                    "DIMENSION" => dimension = Some(number(value, line, "DIMENSION")?),
                    "CAPACITY" => capacity = Some(number(value, line, "CAPACITY")?),
                    "EDGE_WEIGHT_TYPE" if !value.eq_ignore_ascii_case("EUC_2D") => {
                        return Err(syntax(line, format!("unsupported EDGE_WEIGHT_TYPE {value}")));
                    }
                    _ => {}
                }
            }
            Section::Coords | Section::Demands => {
                let toks: Vec<&str> = s.split_whitespace().collect();
                let want = if section == Section::Coords { 3 } else { 2 };
                if toks.len() != want {
                    return Err(syntax(line, format!("expected {want} fields, got {}", toks.len())));
                }
                let id: usize = number(toks[0], line, "node id")?;
                if id == 0 || id >= coords.len() {
                    return Err(syntax(line, format!("node id {id} outside 1..={}", coords.len() - 1)));
                }
                if section == Section::Coords {
                    let x = number(toks[1], line, "coordinate")?;
                    let y = number(toks[2], line, "coordinate")?;
                    coords[id] = Some(Point::new(x, y));
                } else {
                    demands[id] = Some(number(toks[1], line, "demand")?);
                }
            }
            Section::Depots => {
                let id: i64 = number(s, line, "depot id")?;
                if id == -1 {
                    section = Section::Header;
                } else if id <= 0 || id as usize >= coords.len() {
                    return Err(syntax(line, format!("depot id {id} out of range")));
                } else {
                    depots.push(id as usize);
                }
            }
            Section::Done => {}
        }
    }

    let end = last_line.max(1);
    let dim = dimension.ok_or_else(|| syntax(end, "missing DIMENSION"))?;
    let capacity = capacity.ok_or_else(|| syntax(end, "missing CAPACITY"))?;
    if coords.is_empty() {
        return Err(syntax(end, "missing NODE_COORD_SECTION"));
    }
    let depot = match depots.as_slice() {
        [] => 1,
        [d] => *d,
        _ => return Err(syntax(end, "multiple depots are not supported")),
    };
    for id in 1..=dim {
        if coords[id].is_none() {
            return Err(syntax(end, format!("node {id} has no coordinates")));
        }
        if demands[id].is_none() {
            return Err(syntax(end, format!("node {id} has no demand")));
        }
    }
    let mut node_ids = vec![depot];
    let mut customers = Vec::with_capacity(dim - 1);
    for id in (1..=dim).filter(|&id| id != depot) {
        node_ids.push(id);
        customers.push((coords[id].unwrap(), demands[id].unwrap()));
    }
    let name = name.unwrap_or_else(|| "unnamed".to_string());
    let best = comment.as_deref().and_then(value_from_comment);
    let instance = Instance::new(name, coords[depot].unwrap(), &customers, capacity, policy)
        .map_err(VrpError::Instance)?
        .with_best_known(best);
    Ok(VrpFile { instance, node_ids, comment })
}

pub fn read_vrp(path: &Path, policy: DistancePolicy) -> anyhow::Result<VrpFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_vrp(&text, policy).with_context(|| format!("parsing {}", path.display()))
}

/// Serializes an instance with the depot as node 1.
pub fn write_vrp(inst: &Instance, comment: Option<&str>) -> String {
    let mut out = String::new();
    let dim = inst.n_customers() + 1;
    writeln!(out, "NAME : {}", inst.name).unwrap();
    if let Some(c) = comment {
        writeln!(out, "COMMENT : {c}").unwrap();
    }
    writeln!(out, "TYPE : CVRP").unwrap();
    writeln!(out, "DIMENSION : {dim}").unwrap();
    writeln!(out, "EDGE_WEIGHT_TYPE : EUC_2D").unwrap();
    writeln!(out, "CAPACITY : {}", inst.capacity()).unwrap();
    writeln!(out, "NODE_COORD_SECTION").unwrap();
    for id in 0..dim {
        let p = inst.pos(id);
        writeln!(out, "{} {} {}", id + 1, p.x, p.y).unwrap();
    }
    writeln!(out, "DEMAND_SECTION").unwrap();
    for id in 0..dim {
        writeln!(out, "{} {}", id + 1, inst.demand(id)).unwrap();
    }
    out.push_str("DEPOT_SECTION\n1\n-1\nEOF\n");
    out
}

/// Routes as customer ids (CVRPLIB numbering excludes the depot) and the
/// stated cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SolFile {
    pub routes: Vec<Vec<usize>>,
    pub cost: Option<f64>,
}

pub fn parse_sol(text: &str) -> Result<SolFile, VrpError> {
    let mut routes = Vec::new();
    let mut cost = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let lower = s.to_ascii_lowercase();
        if lower.starts_with("route") {
            let (_, ids) = s
                .split_once(':')
                .ok_or_else(|| syntax(line, "route line without `:`"))?;
            let ids = ids
                .split_whitespace()
                .map(|t| number(t, line, "customer id"))
                .collect::<Result<Vec<usize>, _>>()?;
            routes.push(ids);
        } else if lower.starts_with("cost") {
            let v = s[4..].trim().trim_start_matches(':').trim();
            cost = Some(number(v, line, "cost")?);
        }
    }
    Ok(SolFile { routes, cost })
}

pub fn write_sol(sol: &Solution) -> String {
    let mut out = String::new();
    for (k, r) in sol.routes.iter().enumerate() {
        write!(out, "Route #{}:", k + 1).unwrap();
        for c in &r.sequence {
            write!(out, " {c}").unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "Cost {}", sol.total_cost).unwrap();
    out
}

/// Rebuilds a [`Solution`] from parsed routes, recomputing every cost.
pub fn solution_from_sol(inst: &Instance, dm: &DistanceMatrix, sol: &SolFile) -> Solution {
    Solution::from_routes(sol.routes.iter().map(|r| Route::new(r.clone(), inst, dm)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ctr3_core::distance_matrix;

    const SMALL: &str = "NAME : toy-n4-k2
COMMENT : (made up, Optimal value: 42)
TYPE : CVRP
DIMENSION : 4
EDGE_WEIGHT_TYPE : EUC_2D
CAPACITY : 10
NODE_COORD_SECTION
 1 3 4
 2 0 0
 3 6 8
 4 10 0
DEMAND_SECTION
1 4
2 0
3 7
4 5
DEPOT_SECTION
 2
 -1
EOF
";

    #[test]
    fn depot_moves_to_zero() {
        let f = parse_vrp(SMALL, DistancePolicy::Rounded).unwrap();
        let inst = &f.instance;
        assert_eq!(inst.n_customers(), 3);
        assert_eq!(f.node_ids, vec![2, 1, 3, 4]);
        assert_eq!(inst.depot(), Point::new(0.0, 0.0));
        assert_eq!(inst.demand(1), 4.0);
        assert_eq!(inst.capacity(), 10.0);
        assert_eq!(inst.optimal_k, Some(2));
        assert_eq!(inst.best_known, Some(42.0));
        assert_eq!(distance_matrix(inst).get(0, 1), 5.0);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = SMALL.replace("3 6 8", "3 6 x");
        match parse_vrp(&bad, DistancePolicy::Rounded) {
            Err(VrpError::Syntax { line, .. }) => assert_eq!(line, 10),
            other => panic!("{other:?}"),
        }
        let geo = SMALL.replace("EUC_2D", "GEO");
        assert!(matches!(parse_vrp(&geo, DistancePolicy::Rounded), Err(VrpError::Syntax { line: 5, .. })));
    }

    #[test]
    fn oversized_demand_is_an_instance_error() {
        let bad = SMALL.replace("3 7", "3 70");
        assert!(matches!(
            parse_vrp(&bad, DistancePolicy::Rounded),
            Err(VrpError::Instance(InstanceError::DemandExceedsCapacity { .. }))
        ));
    }

    #[test]
    fn missing_demand_reported() {
        let bad = SMALL.replace("4 5\n", "");
        let err = parse_vrp(&bad, DistancePolicy::Rounded).unwrap_err();
        assert!(err.to_string().contains("node 4 has no demand"), "{err}");
    }

    #[test]
    fn write_then_parse_is_identity() {
        let f = parse_vrp(SMALL, DistancePolicy::Rounded).unwrap();
        let again = parse_vrp(&write_vrp(&f.instance, f.comment.as_deref()), DistancePolicy::Rounded).unwrap();
        assert_eq!(again.instance, f.instance);
    }

    #[test]
    fn sol_round_trip() {
        let f = parse_vrp(SMALL, DistancePolicy::Rounded).unwrap();
        let dm = distance_matrix(&f.instance);
        let text = "Route #1: 1 2\nRoute #2: 3\nCost 31\n";
        let parsed = parse_sol(text).unwrap();
        assert_eq!(parsed.routes, vec![vec![1, 2], vec![3]]);
        assert_eq!(parsed.cost, Some(31.0));
        let sol = solution_from_sol(&f.instance, &dm, &parsed);
        assert_eq!(parse_sol(&write_sol(&sol)).unwrap().routes, parsed.routes);
    }

    #[test]
    fn comment_values() {
        assert_eq!(value_from_comment("(Augerat et al, No of trucks: 5, Optimal value: 784)"), Some(784.0));
        assert_eq!(value_from_comment("Best value: 1073"), Some(1073.0));
        assert_eq!(value_from_comment("nothing here"), None);
    }
}
