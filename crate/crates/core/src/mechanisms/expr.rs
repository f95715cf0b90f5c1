//! Mechanism expression grammar.
//!
//! ```text
//! expr  := name [ "(" [ arg { "," arg } ] ")" ]
//! arg   := key "=" number | expr
//! ```
//!
//! `composite` takes two positional sub-expressions; every other family
//! takes keyword parameters, and omitted parameters fall back to defaults.

use super::config::{MechanismConfig, BODY_LDP_DEFAULTS, MOTION_RETARGET_DEFAULTS};
use crate::error::{Error, Result};

pub fn parse(input: &str) -> Result<MechanismConfig> {
    let mut p = Parser { src: input, pos: 0 };
    let cfg = p.expr()?;
    p.skip_ws();
    if p.pos != input.len() {
        return Err(p.error("trailing input"));
    }
    cfg.validate().map_err(|e| p.error(&e.to_string()))?;
    Ok(cfg)
}

enum Arg {
    Keyword(String, f64),
    Nested(MechanismConfig),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> Error {
        Error::MechanismSyntax {
            expr: self.src.to_string(),
            reason: format!("{reason} (at offset {})", self.pos),
        }
    }

    fn rest(&self) -> &str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '-'))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.error("expected a name"));
        }
        let name = self.rest()[..len].to_string();
        self.pos += len;
        Ok(name)
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(self.rest().len());
        let text = &self.rest()[..len];
        let v = text
            .parse::<f64>()
            .map_err(|_| self.error(&format!("invalid number `{text}`")))?;
        self.pos += len;
        Ok(v)
    }

    fn arg(&mut self) -> Result<Arg> {
        let save = self.pos;
        let name = self.ident()?;
        if self.eat('=') {
            return Ok(Arg::Keyword(name, self.number()?));
        }
        self.pos = save;
        Ok(Arg::Nested(self.expr()?))
    }

    fn expr(&mut self) -> Result<MechanismConfig> {
        let name = self.ident()?.to_ascii_lowercase();
        let mut args = Vec::new();
        if self.eat('(') && !self.eat(')') {
            loop {
                args.push(self.arg()?);
                if self.eat(')') {
                    break;
                }
                if !self.eat(',') {
                    return Err(self.error("expected `,` or `)`"));
                }
            }
        }
        self.build(&name, args)
    }

    fn build(&self, name: &str, args: Vec<Arg>) -> Result<MechanismConfig> {
        if matches!(name, "composite" | "compose") {
            let mut nested = Vec::new();
            for a in args {
                match a {
                    Arg::Nested(c) => nested.push(c),
                    Arg::Keyword(k, _) => {
                        return Err(self.error(&format!("composite takes no parameter `{k}`")))
                    }
                }
            }
            let [first, second]: [MechanismConfig; 2] = nested
                .try_into()
                .map_err(|_| self.error("composite takes exactly two mechanisms"))?;
            return Ok(MechanismConfig::composite(first, second));
        }

        let mut kw = Vec::new();
        for a in args {
            match a {
                Arg::Keyword(k, v) => kw.push((k, v)),
                Arg::Nested(c) => {
                    return Err(self.error(&format!("`{name}` cannot take mechanism `{c}`")))
                }
            }
        }
        let mut params = Params { kw, parser: self };
        let cfg = match name {
            "identity" | "none" => MechanismConfig::Identity,
            "gaussian" | "noise" => MechanismConfig::Gaussian {
                sigma_gaze: params.take(&["sigma_gaze", "sigma"], 0.0),
                sigma_pos: params.take(&["sigma_pos"], 0.0),
            },
            "temporal_downsample" | "temporal" => MechanismConfig::TemporalDownsample {
                factor: params.take_int(&["K", "k", "factor"], 1)?,
            },
            "spatial_downsample" | "spatial" => MechanismConfig::SpatialDownsample {
                delta_gaze: params.take(&["delta_gaze", "delta"], 0.0),
                delta_pos: params.take(&["delta_pos"], 0.0),
            },
            "smoothing" | "smooth" => MechanismConfig::Smoothing {
                window: params.take_int(&["B", "b", "window"], 1)?,
            },
            "body_ldp" | "ldp" => MechanismConfig::BodyLdp {
                scale_b: params.take(&["scale_b", "b"], BODY_LDP_DEFAULTS.0),
                bound_c: params.take(&["bound_c", "c"], BODY_LDP_DEFAULTS.1),
                calibration_window: params.take(&["calibration_window"], BODY_LDP_DEFAULTS.2),
            },
            "motion_retarget" | "dmm" => MechanismConfig::MotionRetarget {
                noise_amp: params.take(&["noise_amp"], MOTION_RETARGET_DEFAULTS.0),
                noise_period: params.take(&["noise_period"], MOTION_RETARGET_DEFAULTS.1),
            },
            other => return Err(self.error(&format!("unknown mechanism `{other}`"))),
        };
        params.finish(name)?;
        Ok(cfg)
    }
}

struct Params<'p, 'a> {
    kw: Vec<(String, f64)>,
    parser: &'p Parser<'a>,
}

impl Params<'_, '_> {
    fn take(&mut self, keys: &[&str], default: f64) -> f64 {
        match self.kw.iter().position(|(k, _)| keys.contains(&k.as_str())) {
            Some(i) => self.kw.remove(i).1,
            None => default,
        }
    }

    fn take_int(&mut self, keys: &[&str], default: u32) -> Result<u32> {
        let v = self.take(keys, default as f64);
        if v.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&v) {
            return Err(self
                .parser
                .error(&format!("`{}` must be a non-negative integer", keys[0])));
        }
        Ok(v as u32)
    }

    fn finish(self, name: &str) -> Result<()> {
        match self.kw.first() {
            Some((k, _)) => Err(self
                .parser
                .error(&format!("unknown parameter `{k}` for `{name}`"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_nested_composite() {
        let cfg = parse("composite(motion_retarget, smoothing(B=25))").unwrap();
        assert_eq!(
            cfg,
            MechanismConfig::composite(
                MechanismConfig::motion_retarget(),
                MechanismConfig::smoothing(25)
            )
        );
        assert_eq!(
            cfg.to_string(),
            "composite(motion_retarget(noise_amp=0.05, noise_period=3), smoothing(B=25))"
        );
    }

    #[test]
    fn defaults_and_aliases() {
        assert_eq!(
            parse("gaussian(sigma_pos=0)").unwrap(),
            MechanismConfig::Gaussian {
                sigma_gaze: 0.0,
                sigma_pos: 0.0
            }
        );
        assert_eq!(parse(" none ").unwrap(), MechanismConfig::Identity);
        assert_eq!(
            parse("temporal(K=3)").unwrap(),
            MechanismConfig::TemporalDownsample { factor: 3 }
        );
        assert_eq!(parse("dmm").unwrap(), MechanismConfig::motion_retarget());
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "",
            "gaussian(",
            "gaussian(sigma=)",
            "smoothing(B=2.5)",
            "smoothing(B=0)",
            "smoothing(B=300)",
            "temporal_downsample(K=0)",
            "body_ldp(scale_b=0)",
            "composite(identity)",
            "composite(identity, identity, identity)",
            "gaussian(foo=1)",
            "warp(x=1)",
            "identity extra",
            "smoothing(identity)",
        ] {
            assert!(parse(bad).is_err(), "accepted `{bad}`");
        }
    }

    #[test]
    fn depth_limit() {
        let mut expr = "identity".to_string();
        for _ in 0..8 {
            expr = format!("composite({expr}, identity)");
        }
        assert!(parse(&expr).is_ok());
        expr = format!("composite({expr}, identity)");
        assert!(parse(&expr).is_err());
    }

    fn leaf() -> impl Strategy<Value = MechanismConfig> {
        prop_oneof![
            Just(MechanismConfig::Identity),
            (0.0f64..5.0, 0.0f64..1.0).prop_map(|(a, b)| MechanismConfig::Gaussian {
                sigma_gaze: a,
                sigma_pos: b
            }),
            (1u32..20).prop_map(|k| MechanismConfig::TemporalDownsample { factor: k }),
            (0.0f64..5.0, 0.0f64..1.0).prop_map(|(a, b)| MechanismConfig::SpatialDownsample {
                delta_gaze: a,
                delta_pos: b
            }),
            (1u32..=256).prop_map(MechanismConfig::smoothing),
            (0.001f64..1.0, 0.0f64..1.0, 0.5f64..10.0).prop_map(|(b, c, w)| {
                MechanismConfig::BodyLdp {
                    scale_b: b,
                    bound_c: c,
                    calibration_window: w,
                }
            }),
            (0.0f64..0.5, 0.1f64..10.0).prop_map(|(a, p)| MechanismConfig::MotionRetarget {
                noise_amp: a,
                noise_period: p
            }),
        ]
    }

    fn config() -> impl Strategy<Value = MechanismConfig> {
        leaf().prop_recursive(3, 8, 2, |inner| {
            (inner.clone(), inner).prop_map(|(a, b)| MechanismConfig::composite(a, b))
        })
    }

    proptest! {
        #[test]
        fn display_parse_round_trip(cfg in config()) {
            prop_assert_eq!(parse(&cfg.to_string()).unwrap(), cfg);
        }
    }
}
