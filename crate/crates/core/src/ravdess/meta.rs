use std::fmt;

use serde::{Deserialize, Serialize};

use super::RavdessError;

macro_rules! coded_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident = $code:expr => $label:expr),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name {
            $($variant = $code),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn code(self) -> u8 {
                self as u8
            }

            pub fn from_code(code: u8) -> Option<Self> {
                match code {
                    $($code => Some($name::$variant),)+
                    _ => None,
                }
            }

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

coded_enum!(Modality {
    FullAv = 1 => "full-AV",
    VideoOnly = 2 => "video-only",
    AudioOnly = 3 => "audio-only",
});

coded_enum!(VocalChannel {
    Speech = 1 => "speech",
    Song = 2 => "song",
});

coded_enum!(
    /// The eight RAVDESS emotion categories, in code order.
    Emotion {
        Neutral = 1 => "neutral",
        Calm = 2 => "calm",
        Happy = 3 => "happy",
        Sad = 4 => "sad",
        Angry = 5 => "angry",
        Fearful = 6 => "fearful",
        Disgust = 7 => "disgust",
        Surprised = 8 => "surprised",
    }
);

coded_enum!(Intensity {
    Normal = 1 => "normal",
    Strong = 2 => "strong",
});

coded_enum!(Statement {
    Kids = 1 => "kids",
    Dogs = 2 => "dogs",
});

impl Emotion {
    /// Zero-based class index used as the training label.
    pub fn class_index(self) -> usize {
        self.code() as usize - 1
    }

    pub fn from_class_index(index: usize) -> Option<Self> {
        u8::try_from(index + 1).ok().and_then(Self::from_code)
    }
}

/// Emotion names in class-index order.
pub fn emotion_labels() -> Vec<&'static str> {
    Emotion::ALL.iter().map(|e| e.name()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

/// The decoded seven-part RAVDESS identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RavdessMeta {
    pub modality: Modality,
    pub channel: VocalChannel,
    pub emotion: Emotion,
    pub intensity: Intensity,
    pub statement: Statement,
    pub repetition: u8,
    pub actor: u8,
}

impl RavdessMeta {
    /// Odd-numbered actors are male, even-numbered female.
    pub fn gender(&self) -> Gender {
        if self.actor % 2 == 1 {
            Gender::Male
        } else {
            Gender::Female
        }
    }

    pub fn label(&self) -> usize {
        self.emotion.class_index()
    }

    pub fn is_speech_audio(&self) -> bool {
        self.modality == Modality::AudioOnly && self.channel == VocalChannel::Speech
    }

    /// Canonical `MM-VV-EE-II-SS-RR-AA.wav` file name.
    pub fn file_name(&self) -> String {
        format!(
            "{:02}-{:02}-{:02}-{:02}-{:02}-{:02}-{:02}.wav",
            self.modality.code(),
            self.channel.code(),
            self.emotion.code(),
            self.intensity.code(),
            self.statement.code(),
            self.repetition,
            self.actor
        )
    }

    fn validate(&self) -> Result<(), RavdessError> {
        if self.emotion == Emotion::Neutral && self.intensity == Intensity::Strong {
            return Err(RavdessError::NeutralStrongConflict);
        }
        Ok(())
    }

    /// Every valid identifier, in lexicographic file-name order.
    pub fn enumerate_valid() -> Vec<RavdessMeta> {
        let mut all = Vec::new();
        for &modality in Modality::ALL {
            for &channel in VocalChannel::ALL {
                for &emotion in Emotion::ALL {
                    for &intensity in Intensity::ALL {
                        for &statement in Statement::ALL {
                            for repetition in 1..=2 {
                                for actor in 1..=24 {
                                    let meta = RavdessMeta {
                                        modality,
                                        channel,
                                        emotion,
                                        intensity,
                                        statement,
                                        repetition,
                                        actor,
                                    };
                                    if meta.validate().is_ok() {
                                        all.push(meta);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        all
    }
}

const FIELDS: [&str; 7] = [
    "modality",
    "vocal channel",
    "emotion",
    "intensity",
    "statement",
    "repetition",
    "actor",
];

/// Decodes a RAVDESS file name such as `03-01-06-01-02-01-12.wav`.
/// Leading directories are ignored.
pub fn parse_filename(name: &str) -> Result<RavdessMeta, RavdessError> {
    let base = name.rsplit(['/', '\\']).next().unwrap_or(name);
    let stem = match base.len().checked_sub(4).map(|i| base.split_at(i)) {
        Some((stem, ext)) if ext.eq_ignore_ascii_case(".wav") => stem,
        _ => return Err(RavdessError::NotWav(base.to_string())),
    };
    let parts: Vec<&str> = stem.split('-').collect();
    if parts.len() != 7 {
        return Err(RavdessError::BadPartCount(parts.len()));
    }
    let mut codes = [0u8; 7];
    for (i, part) in parts.iter().enumerate() {
        if part.len() != 2 || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(RavdessError::NonNumericPart {
                index: i,
                part: part.to_string(),
            });
        }
        codes[i] = part.parse().expect("two ascii digits");
    }
    let out_of_range = |i: usize| RavdessError::CodeOutOfRange {
        field: FIELDS[i],
        value: codes[i],
    };
    let repetition = codes[5];
    if !(1..=2).contains(&repetition) {
        return Err(out_of_range(5));
    }
    let actor = codes[6];
    if !(1..=24).contains(&actor) {
        return Err(out_of_range(6));
    }
    let meta = RavdessMeta {
        modality: Modality::from_code(codes[0]).ok_or_else(|| out_of_range(0))?,
        channel: VocalChannel::from_code(codes[1]).ok_or_else(|| out_of_range(1))?,
        emotion: Emotion::from_code(codes[2]).ok_or_else(|| out_of_range(2))?,
        intensity: Intensity::from_code(codes[3]).ok_or_else(|| out_of_range(3))?,
        statement: Statement::from_code(codes[4]).ok_or_else(|| out_of_range(4))?,
        repetition,
        actor,
    };
    meta.validate()?;
    Ok(meta)
}
