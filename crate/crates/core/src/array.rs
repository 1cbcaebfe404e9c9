//! Linear-array geometry, channel switching and steering vectors.
//!
//! Element positions are stored in meters along the array axis. A channel
//! selection is kept as sorted 1-based index subsets rather than 0/1
//! switching matrices. All vectors over the MIMO virtual array use Tx-major
//! order: for each selected transmitter in turn, every selected receiver.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Single transmitter (SIMO) or time-division multiplexed MIMO operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArrayMode {
    Simo,
    Mimo,
}

impl ArrayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ArrayMode::Simo => "simo",
            ArrayMode::Mimo => "mimo",
        }
    }
}

/// Physical Tx and Rx element positions of a linear array.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    rx_positions: Vec<f64>,
    tx_positions: Vec<f64>,
    wavelength: f64,
    inter_pulse: f64,
}

impl ArrayGeometry {
    pub fn new(
        rx_positions: Vec<f64>,
        tx_positions: Vec<f64>,
        wavelength: f64,
        inter_pulse: f64,
    ) -> Result<Self> {
        check_line(&rx_positions, "rx")?;
        check_line(&tx_positions, "tx")?;
        if !(wavelength > 0.0) || !wavelength.is_finite() {
            return Err(Error::invalid(format!("wavelength must be > 0, got {wavelength}")));
        }
        if !(inter_pulse >= 0.0) {
            return Err(Error::invalid(format!("inter-pulse period must be >= 0, got {inter_pulse}")));
        }
        Ok(Self {
            rx_positions,
            tx_positions,
            wavelength,
            inter_pulse,
        })
    }

    pub fn rx_positions(&self) -> &[f64] {
        &self.rx_positions
    }

    pub fn tx_positions(&self) -> &[f64] {
        &self.tx_positions
    }

    pub fn n_rx(&self) -> usize {
        self.rx_positions.len()
    }

    pub fn n_tx(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    pub fn inter_pulse(&self) -> f64 {
        self.inter_pulse
    }

    /// Same geometry with every position multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::invalid("scale factor must be > 0"));
        }
        Self::new(
            self.rx_positions.iter().map(|d| d * factor).collect(),
            self.tx_positions.iter().map(|d| d * factor).collect(),
            self.wavelength,
            self.inter_pulse,
        )
    }
}

fn check_line(pos: &[f64], what: &str) -> Result<()> {
    match pos.first() {
        None => return Err(Error::invalid(format!("{what} line has no elements"))),
        Some(&first) if first != 0.0 => {
            return Err(Error::invalid(format!("first {what} element must sit at 0, got {first}")))
        }
        _ => {}
    }
    if pos.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(format!("{what} positions must be strictly increasing")));
    }
    Ok(())
}

/// Uniform Tx and Rx lines with element `i` at `i * spacing_factor * λ/2`.
pub fn uniform_geometry(
    n_rx: usize,
    n_tx: usize,
    spacing_factor: f64,
    wavelength: f64,
    inter_pulse: f64,
) -> Result<ArrayGeometry> {
    if n_rx == 0 || n_tx == 0 {
        return Err(Error::invalid("element counts must be >= 1"));
    }
    if !(spacing_factor > 0.0) {
        return Err(Error::invalid(format!("spacing factor must be > 0, got {spacing_factor}")));
    }
    let step = spacing_factor * wavelength / 2.0;
    let line = |n: usize| (0..n).map(|i| i as f64 * step).collect::<Vec<_>>();
    ArrayGeometry::new(line(n_rx), line(n_tx), wavelength, inter_pulse)
}

/// Active transmitters and receivers as sorted, distinct, 1-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelSelection {
    tx_idx: Vec<usize>,
    rx_idx: Vec<usize>,
}

impl ChannelSelection {
    pub fn new(tx_idx: Vec<usize>, rx_idx: Vec<usize>) -> Result<Self> {
        for (name, idx) in [("tx", &tx_idx), ("rx", &rx_idx)] {
            if idx.is_empty() {
                return Err(Error::invalid(format!("{name} selection is empty")));
            }
            if idx[0] == 0 {
                return Err(Error::invalid(format!("{name} indices are 1-based")));
            }
            if idx.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(format!("{name} indices must be sorted and distinct")));
            }
        }
        Ok(Self { tx_idx, rx_idx })
    }

    /// SIMO selection: transmitter 1 with the given receivers.
    pub fn simo(rx_idx: Vec<usize>) -> Result<Self> {
        Self::new(vec![1], rx_idx)
    }

    pub fn tx_idx(&self) -> &[usize] {
        &self.tx_idx
    }

    pub fn rx_idx(&self) -> &[usize] {
        &self.rx_idx
    }

    pub fn contains_first(&self) -> bool {
        self.tx_idx[0] == 1 && self.rx_idx[0] == 1
    }

    /// Fails if any index exceeds the geometry's element count.
    pub fn check_bounds(&self, geom: &ArrayGeometry) -> Result<()> {
        if let Some(&i) = self.rx_idx.last().filter(|&&i| i > geom.n_rx()) {
            return Err(Error::invalid(format!("rx index {i} out of range 1..={}", geom.n_rx())));
        }
        if let Some(&i) = self.tx_idx.last().filter(|&&i| i > geom.n_tx()) {
            return Err(Error::invalid(format!("tx index {i} out of range 1..={}", geom.n_tx())));
        }
        Ok(())
    }
}

impl fmt::Display for ChannelSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tx={} rx={}", join_indices(&self.tx_idx), join_indices(&self.rx_idx))
    }
}

/// Indices joined with `;`, e.g. `1;3;4`.
pub fn join_indices(idx: &[usize]) -> String {
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

/// Positions of the selected receivers, in selection order.
pub fn selected_rx_positions(geom: &ArrayGeometry, sel: &ChannelSelection) -> Result<Vec<f64>> {
    sel.check_bounds(geom)?;
    Ok(sel.rx_idx.iter().map(|&i| geom.rx_positions[i - 1]).collect())
}

/// Positions of the selected transmitters, in selection order.
pub fn selected_tx_positions(geom: &ArrayGeometry, sel: &ChannelSelection) -> Result<Vec<f64>> {
    sel.check_bounds(geom)?;
    Ok(sel.tx_idx.iter().map(|&i| geom.tx_positions[i - 1]).collect())
}

/// Virtual array `1 ⊗ d_rx + d_tx ⊗ 1` in Tx-major order; coincident
/// positions are kept.
pub fn virtual_positions(geom: &ArrayGeometry, sel: &ChannelSelection) -> Result<Vec<f64>> {
    let rx = selected_rx_positions(geom, sel)?;
    let tx = selected_tx_positions(geom, sel)?;
    Ok(tx
        .iter()
        .flat_map(|&t| rx.iter().map(move |&r| t + r))
        .collect())
}

/// Positions seen by the likelihood: selected Rx for SIMO, virtual for MIMO.
pub fn effective_positions(
    geom: &ArrayGeometry,
    sel: &ChannelSelection,
    mode: ArrayMode,
) -> Result<Vec<f64>> {
    match mode {
        ArrayMode::Simo => selected_rx_positions(geom, sel),
        ArrayMode::Mimo => virtual_positions(geom, sel),
    }
}

/// Per-channel TDM Doppler phase coefficients `2πT·p` for the p-th selected
/// transmitter (p from 1), repeated over the selected receivers.
pub fn tdm_phases(sel: &ChannelSelection, inter_pulse: f64) -> Vec<f64> {
    let n_rx = sel.rx_idx.len();
    (1..=sel.tx_idx.len())
        .flat_map(|p| std::iter::repeat_n(2.0 * PI * inter_pulse * p as f64, n_rx))
        .collect()
}

/// Switched steering vector at electronic azimuth `theta = sin φ`.
///
/// SIMO uses only the receive selection; MIMO adds the per-pulse Doppler
/// phase of the TDM sequence.
pub fn steering_vector(
    geom: &ArrayGeometry,
    sel: &ChannelSelection,
    theta: f64,
    f_d: f64,
    mode: ArrayMode,
) -> Result<Vec<Complex64>> {
    if !(theta.abs() <= 1.0) {
        return Err(Error::invalid(format!("electronic azimuth must lie in [-1, 1], got {theta}")));
    }
    let k0 = geom.wavenumber();
    match mode {
        ArrayMode::Simo => Ok(selected_rx_positions(geom, sel)?
            .into_iter()
            .map(|d| Complex64::cis(k0 * d * theta))
            .collect()),
        ArrayMode::Mimo => {
            let virt = virtual_positions(geom, sel)?;
            let tdm = tdm_phases(sel, geom.inter_pulse);
            Ok(virt
                .iter()
                .zip(&tdm)
                .map(|(&d, &g)| Complex64::cis(k0 * d * theta + g * f_d))
                .collect())
        }
    }
}
