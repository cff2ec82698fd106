//! CSV tables. Column names are single tokens so gnuplot can use them with
//! `set key autotitle columnhead`. Floats are written in their shortest
//! round-trip form.

use std::fmt::Display;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::HexGrid;
use crate::market::RouteReport;
use crate::qos::SwitchPlan;
use crate::router::{Absorbing, AbsorbingChain};
use crate::security::Observation;
use crate::simkit::McEstimate;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if its width differs from the header.
    pub fn push<I, T>(&mut self, row: I)
    where
        I: IntoIterator<Item = T>,
        T: Display,
    {
        let row: Vec<String> = row.into_iter().map(|v| v.to_string()).collect();
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column parsed as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column(name)
            .ok_or_else(|| Error::Csv(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[i].parse()
                    .map_err(|_| Error::Csv(format!("`{}` in `{name}` is not a number", r[i])))
            })
            .collect()
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Csv(e.to_string()))
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let columns = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Table { columns, rows })
    }
}

pub fn grid_table(grid: &HexGrid) -> Result<Table> {
    let mut t = Table::new([
        "id", "q", "r", "x", "y", "ring", "slot", "degree", "boundary",
    ]);
    for cell in grid.subcells() {
        t.push([
            cell.id.to_string(),
            cell.coord.q.to_string(),
            cell.coord.r.to_string(),
            cell.center.x.to_string(),
            cell.center.y.to_string(),
            cell.coord.ring().to_string(),
            grid.slot_of(cell.id)?.to_string(),
            grid.degree(cell.id)?.to_string(),
            u8::from(grid.is_boundary(cell.id)?).to_string(),
        ]);
    }
    Ok(t)
}

/// Non-zero transitions in canonical order as `(from, to, probability)`.
/// Absorbing states are labelled `D` and `nr`, transient states by subcell.
pub fn chain_table(chain: &AbsorbingChain) -> Table {
    let labels: Vec<String> = Absorbing::ALL
        .iter()
        .map(|a| a.label().to_string())
        .chain(chain.transient_states().iter().map(|s| s.to_string()))
        .collect();
    let p = chain.canonical_matrix();
    let mut t = Table::new(["from", "to", "probability"]);
    for i in 0..p.nrows() {
        for j in 0..p.ncols() {
            if p[(i, j)] != 0.0 {
                t.push([labels[i].clone(), labels[j].clone(), p[(i, j)].to_string()]);
            }
        }
    }
    t
}

pub fn plan_table(plans: &[SwitchPlan]) -> Table {
    let mut t = Table::new([
        "xi_min", "tau_max", "t_w", "n_w", "w_min", "w_star", "w_r_min",
    ]);
    for p in plans {
        t.push([
            p.link_reliability_min.to_string(),
            p.delay_max.to_string(),
            p.switching_time.to_string(),
            p.switch_count.to_string(),
            p.min_channels.to_string(),
            p.optimal_channels.to_string(),
            p.purchase_count.to_string(),
        ]);
    }
    t
}

pub fn trajectory_table(trajectory: &[Observation]) -> Table {
    let mut t = Table::new(["episode", "s_c", "s_ij"]);
    for o in trajectory {
        t.push([
            o.episode.to_string(),
            o.experience.to_string(),
            o.reputation.to_string(),
        ]);
    }
    t
}

pub fn estimate_table(estimates: &[McEstimate]) -> Table {
    let mut t = Table::new([
        "seed", "episodes", "tau_hat", "tau_se", "p_d_hat", "p_d_se", "p_nr_hat", "p_nr_se",
    ]);
    for e in estimates {
        t.push([
            e.seed.to_string(),
            e.episodes.to_string(),
            e.mean_hops.to_string(),
            e.mean_hops_se.to_string(),
            e.to_destination.to_string(),
            e.to_destination_se.to_string(),
            e.no_route.to_string(),
            e.no_route_se.to_string(),
        ]);
    }
    t
}

pub fn report_table(reports: &[RouteReport]) -> Table {
    let mut t = Table::new([
        "w_r",
        "w",
        "tau",
        "p_d",
        "p_nr",
        "xi_r",
        "c_r",
        "throughput",
        "p_nd",
        "secure_throughput",
        "price",
        "utility",
    ]);
    for r in reports {
        t.push([
            r.purchase.to_string(),
            r.backup_channels.to_string(),
            r.route_length.to_string(),
            r.to_destination.to_string(),
            r.no_route.to_string(),
            r.route_reliability.to_string(),
            r.route_capacity.to_string(),
            r.throughput.to_string(),
            r.non_interception.to_string(),
            r.secure_throughput.to_string(),
            r.price.to_string(),
            r.utility.to_string(),
        ]);
    }
    t
}
