//! Named RGB colors.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ColorError {
    #[error("color name {0:?} must be non-empty and lowercase")]
    BadName(String),
    #[error("color {0:?} listed twice")]
    Duplicate(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamedColor {
    pub name: String,
    pub rgb: [u8; 3],
}

impl NamedColor {
    /// Euclidean distance in 0-255 RGB space.
    pub fn distance(&self, other: &NamedColor) -> f64 {
        rgb_distance(self.rgb, other.rgb)
    }

    /// Number of whitespace-separated words in the name.
    pub fn word_count(&self) -> usize {
        self.name.split_whitespace().count()
    }
}

pub fn rgb_distance(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = f64::from(*x) - f64::from(*y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Color names with unique lowercase names, kept in file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColorTable {
    colors: Vec<NamedColor>,
    index: HashMap<String, usize>,
}

impl ColorTable {
    pub fn new(colors: Vec<NamedColor>) -> Result<Self, ColorError> {
        let mut index = HashMap::with_capacity(colors.len());
        for (i, c) in colors.iter().enumerate() {
            let normalized = c.name.split_whitespace().collect::<Vec<_>>().join(" ");
            if c.name.is_empty() || c.name != c.name.to_lowercase() || normalized != c.name {
                return Err(ColorError::BadName(c.name.clone()));
            }
            if index.insert(c.name.clone(), i).is_some() {
                return Err(ColorError::Duplicate(c.name.clone()));
            }
        }
        Ok(Self { colors, index })
    }

    pub fn get(&self, name: &str) -> Option<&NamedColor> {
        self.index.get(name).map(|&i| &self.colors[i])
    }

    pub fn colors(&self) -> &[NamedColor] {
        &self.colors
    }

    pub fn len(&self) -> usize {
        self.colors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.colors.is_empty()
    }

    /// Longest name measured in words.
    pub fn max_words(&self) -> usize {
        self.colors.iter().map(NamedColor::word_count).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(name: &str, rgb: [u8; 3]) -> NamedColor {
        NamedColor {
            name: name.into(),
            rgb,
        }
    }

    #[test]
    fn distances() {
        assert_eq!(rgb_distance([255, 0, 0], [255, 165, 0]), 165.0);
        let d = rgb_distance([255, 0, 0], [0, 0, 255]);
        assert!((d - 360.624_458_405_139_2).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_names() {
        assert!(ColorTable::new(vec![c("Red", [255, 0, 0])]).is_err());
        assert!(ColorTable::new(vec![c("red", [255, 0, 0]), c("red", [1, 0, 0])]).is_err());
        assert!(ColorTable::new(vec![c("light  blue", [1, 2, 3])]).is_err());
        let t = ColorTable::new(vec![c("red", [255, 0, 0]), c("light blue", [173, 216, 230])]).unwrap();
        assert_eq!(t.max_words(), 2);
        assert_eq!(t.get("light blue").unwrap().rgb, [173, 216, 230]);
    }
}
