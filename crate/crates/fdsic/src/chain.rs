//! Transmit-to-receive SI chain for one OFDM symbol: IDFT, IQ imbalance,
//! cyclic prefix, PA, SI channel, receiver noise, CP removal and DFT.

use crate::channel::EffectiveChannel;
use crate::impairments::{apply_iq_time, apply_pa, IqImbalance, PaPolynomial};
use crate::ofdm::{add_cp, dft, idft, remove_cp, FreqSymbol, SubcarrierGrid, TimeSignal};
use crate::{cgauss, Error, Result, Rng, C64};

#[derive(Clone, Debug)]
pub struct SiChain {
    pub grid: SubcarrierGrid,
    pub iq: IqImbalance,
    pub pa: PaPolynomial,
    pub channel: EffectiveChannel,
    /// Receiver noise power per subcarrier after the (unscaled) DFT.
    pub noise_power: f64,
}

impl SiChain {
    pub fn new(
        grid: SubcarrierGrid,
        iq: IqImbalance,
        pa: PaPolynomial,
        channel: EffectiveChannel,
        noise_power: f64,
    ) -> Result<Self> {
        if channel.freq.len() != grid.num_subcarriers() {
            return Err(Error::Mismatch("channel and grid sizes differ".into()));
        }
        if channel.taps.len() > grid.cp_length() + 1 {
            return Err(Error::Config(format!(
                "channel has {} taps, cyclic prefix covers {}",
                channel.taps.len(),
                grid.cp_length() + 1
            )));
        }
        if noise_power < 0.0 {
            return Err(Error::Config("noise power must be nonnegative".into()));
        }
        Ok(SiChain { grid, iq, pa, channel, noise_power })
    }

    /// Received time samples of one symbol, CP removed.
    pub fn receive_time(&self, x: &FreqSymbol, rng: &mut Rng) -> Result<TimeSignal> {
        let t = idft(x, &self.grid)?;
        let t = add_cp(&apply_iq_time(&t, &self.iq), self.grid.cp_length())?;
        let t = apply_pa(&t, &self.pa);
        let mut y = self.channel.convolve(&t.samples);
        if self.noise_power > 0.0 {
            let var = self.noise_power / self.grid.num_subcarriers() as f64;
            for v in y.iter_mut() {
                *v += cgauss(rng, var);
            }
        }
        remove_cp(&TimeSignal { samples: y, has_cp: true }, self.grid.cp_length())
    }

    pub fn receive(&self, x: &FreqSymbol, rng: &mut Rng) -> Result<FreqSymbol> {
        let t = self.receive_time(x, rng)?;
        let mut y = dft(&t, &self.grid)?;
        y.index = x.index;
        Ok(y)
    }

    /// Noise-free SI spectrum, the part a perfect canceller removes.
    pub fn si_only(&self, x: &FreqSymbol) -> Result<FreqSymbol> {
        let quiet = SiChain { noise_power: 0.0, ..self.clone() };
        quiet.receive(x, &mut crate::rng(0))
    }
}

/// Receiver noise alone, as it appears per subcarrier.
pub fn noise_symbol(p: usize, noise_power: f64, rng: &mut Rng) -> Vec<C64> {
    (0..p).map(|_| cgauss(rng, noise_power)).collect()
}
