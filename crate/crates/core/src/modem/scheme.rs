use std::fmt;
use std::str::FromStr;

use super::ModemError;

/// The twenty modulation formats recognized by the classifiers.
///
/// The discriminant order defines the class index used as the training label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModulationScheme {
    Bpsk,
    Qpsk,
    Psk8,
    Psk16,
    Qam16,
    Qam32,
    Qam64,
    Qam128,
    Qam256,
    Apsk16,
    Apsk32,
    Apsk64,
    Apsk128,
    Ook,
    Ask4,
    Gmsk,
    Fm,
    Am,
    Dsb,
    Ssb,
}

impl ModulationScheme {
    pub const COUNT: usize = 20;

    pub const ALL: [ModulationScheme; Self::COUNT] = [
        Self::Bpsk,
        Self::Qpsk,
        Self::Psk8,
        Self::Psk16,
        Self::Qam16,
        Self::Qam32,
        Self::Qam64,
        Self::Qam128,
        Self::Qam256,
        Self::Apsk16,
        Self::Apsk32,
        Self::Apsk64,
        Self::Apsk128,
        Self::Ook,
        Self::Ask4,
        Self::Gmsk,
        Self::Fm,
        Self::Am,
        Self::Dsb,
        Self::Ssb,
    ];

    pub fn class_index(self) -> usize {
        self as usize
    }

    pub fn from_class_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Bpsk => "BPSK",
            Self::Qpsk => "QPSK",
            Self::Psk8 => "8PSK",
            Self::Psk16 => "16PSK",
            Self::Qam16 => "16QAM",
            Self::Qam32 => "32QAM",
            Self::Qam64 => "64QAM",
            Self::Qam128 => "128QAM",
            Self::Qam256 => "256QAM",
            Self::Apsk16 => "16APSK",
            Self::Apsk32 => "32APSK",
            Self::Apsk64 => "64APSK",
            Self::Apsk128 => "128APSK",
            Self::Ook => "OOK",
            Self::Ask4 => "4ASK",
            Self::Gmsk => "GMSK",
            Self::Fm => "FM",
            Self::Am => "AM",
            Self::Dsb => "DSB",
            Self::Ssb => "SSB",
        }
    }

    /// True for schemes synthesized by mapping bits onto a fixed point set
    /// followed by linear pulse shaping.
    pub fn is_linear_digital(self) -> bool {
        !matches!(
            self,
            Self::Gmsk | Self::Fm | Self::Am | Self::Dsb | Self::Ssb
        )
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationScheme {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|scheme| scheme.name().eq_ignore_ascii_case(wanted))
            .ok_or_else(|| ModemError::UnknownScheme(wanted.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn class_index_is_a_bijection() {
        let indices: HashSet<usize> = ModulationScheme::ALL.iter().map(|s| s.class_index()).collect();
        assert_eq!(indices.len(), 20);
        for (i, s) in ModulationScheme::ALL.iter().enumerate() {
            assert_eq!(s.class_index(), i);
            assert_eq!(ModulationScheme::from_class_index(i), Some(*s));
        }
        assert_eq!(ModulationScheme::from_class_index(20), None);
    }

    #[test]
    fn names_round_trip() {
        for s in ModulationScheme::ALL {
            assert_eq!(s.name().parse::<ModulationScheme>().unwrap(), s);
        }
        assert_eq!("16qam".parse::<ModulationScheme>().unwrap(), ModulationScheme::Qam16);
        assert!("QAM17".parse::<ModulationScheme>().is_err());
    }

    #[test]
    fn fifteen_linear_digital_schemes() {
        let n = ModulationScheme::ALL.iter().filter(|s| s.is_linear_digital()).count();
        assert_eq!(n, 15);
    }
}
