use serde::{Deserialize, Serialize};

use crate::geometry::{contains, expand, Box7, ExpandMode, GeometryError, Point};

/// How far around each box points are treated as belonging to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextMode {
    /// The original box.
    None,
    /// Box dimensions multiplied by `amount`.
    Factor,
    /// `amount` meters added to each box dimension.
    Length,
    /// Only the representative point nearest to each box center, among those inside it.
    Centers,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub mode: ContextMode,
    #[serde(default)]
    pub amount: f64,
}

impl ContextConfig {
    pub fn none() -> Self {
        Self {
            mode: ContextMode::None,
            amount: 0.0,
        }
    }

    pub fn length(amount: f64) -> Self {
        Self {
            mode: ContextMode::Length,
            amount,
        }
    }

    pub fn factor(amount: f64) -> Self {
        Self {
            mode: ContextMode::Factor,
            amount,
        }
    }

    pub fn centers() -> Self {
        Self {
            mode: ContextMode::Centers,
            amount: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self.mode {
            ContextMode::Factor | ContextMode::Length
                if !(self.amount > 0.0 && self.amount.is_finite()) =>
            {
                Err(GeometryError::NonPositiveAmount(self.amount))
            }
            _ => Ok(()),
        }
    }

    fn region(&self, b: &Box7) -> Result<Box7, GeometryError> {
        match self.mode {
            ContextMode::Factor => expand(b, ExpandMode::Factor, self.amount),
            ContextMode::Length => expand(b, ExpandMode::Length, self.amount),
            ContextMode::None | ContextMode::Centers => Ok(*b),
        }
    }
}

/// Index into `boxes` of the instance each point belongs to, if any. A point
/// inside several regions goes to the box with the nearest center.
pub fn assign_membership(
    points: &[Point],
    boxes: &[Box7],
    config: ContextConfig,
) -> Result<Vec<Option<usize>>, GeometryError> {
    config.validate()?;
    let regions = boxes
        .iter()
        .map(|b| config.region(b))
        .collect::<Result<Vec<_>, _>>()?;
    let nearest_box = |p: Point, candidates: &mut dyn Iterator<Item = usize>| {
        candidates.min_by(|&a, &b| {
            p.dist_sq(boxes[a].center())
                .total_cmp(&p.dist_sq(boxes[b].center()))
                .then(a.cmp(&b))
        })
    };
    let mut out: Vec<Option<usize>> = points
        .iter()
        .map(|&p| {
            nearest_box(
                p,
                &mut (0..boxes.len()).filter(|&k| contains(&regions[k], p)),
            )
        })
        .collect();
    if config.mode == ContextMode::Centers {
        let mut keep = vec![None; points.len()];
        for (k, b) in boxes.iter().enumerate() {
            let best = (0..points.len())
                .filter(|&i| out[i] == Some(k))
                .min_by(|&i, &j| {
                    points[i]
                        .dist_sq(b.center())
                        .total_cmp(&points[j].dist_sq(b.center()))
                        .then(i.cmp(&j))
                });
            if let Some(i) = best {
                keep[i] = Some(k);
            }
        }
        out = keep;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(x: f64, id: u32) -> Box7 {
        Box7::new(Point::new(x, 0.0, 0.0), [2.0, 2.0, 2.0], 0.0, 0)
            .unwrap()
            .with_instance(id)
    }

    #[test]
    fn center_is_member_in_every_mode() {
        let b = [unit(0.0, 0)];
        for cfg in [
            ContextConfig::none(),
            ContextConfig::factor(1.5),
            ContextConfig::length(1.0),
            ContextConfig::centers(),
        ] {
            assert_eq!(
                assign_membership(&[Point::new(0.0, 0.0, 0.0)], &b, cfg).unwrap(),
                vec![Some(0)]
            );
        }
    }

    #[test]
    fn context_extends_membership() {
        let b = [unit(0.0, 0)];
        let p = [Point::new(1.4, 0.0, 0.0)];
        assert_eq!(
            assign_membership(&p, &b, ContextConfig::length(1.0)).unwrap(),
            vec![Some(0)]
        );
        assert_eq!(
            assign_membership(&p, &b, ContextConfig::none()).unwrap(),
            vec![None]
        );
    }

    #[test]
    fn overlap_goes_to_nearer_center() {
        let b = [unit(0.0, 0), unit(2.5, 1)];
        let p = [Point::new(1.5, 0.0, 0.0), Point::new(1.0, 0.0, 0.0)];
        let got = assign_membership(&p, &b, ContextConfig::length(2.0)).unwrap();
        assert_eq!(got, vec![Some(1), Some(0)]);
    }

    #[test]
    fn centers_keeps_one_point_per_box() {
        let b = [unit(0.0, 0), unit(5.0, 1)];
        let p = [
            Point::new(0.5, 0.0, 0.0),
            Point::new(0.1, 0.0, 0.0),
            Point::new(5.2, 0.0, 0.0),
            Point::new(9.0, 0.0, 0.0),
        ];
        let got = assign_membership(&p, &b, ContextConfig::centers()).unwrap();
        assert_eq!(got, vec![None, Some(0), Some(1), None]);
    }

    #[test]
    fn rejects_bad_amount() {
        assert!(assign_membership(&[], &[], ContextConfig::length(0.0)).is_err());
    }
}
