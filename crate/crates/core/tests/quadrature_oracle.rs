//! Monte Carlo oracle for the averaged PEP: sample ordered Rayleigh gains,
//! average `Q(|h_l| β/υ)`, compare with quadrature within 3 standard errors.

use noma_pep::channel::OrderedChannelSampler;
use noma_pep::pep::pep_quadrature;
use noma_pep::special::q_function;
use noma_pep::ChannelModel;

#[test]
fn quadrature_matches_sampled_ordered_gains() {
    const SAMPLES: usize = 10_000_000;
    // (β, υ): moderate arguments so every user's PEP is well above 1/SAMPLES
    let (beta, ups) = (1.2, 0.35);
    for big_l in 1..=4 {
        let model = ChannelModel::new(big_l, 1.0, 1.0).unwrap();
        let mut sampler = OrderedChannelSampler::new(model, 100 + big_l as u64);
        let mut sum = vec![0.0; big_l];
        let mut sum_sq = vec![0.0; big_l];
        for _ in 0..SAMPLES {
            let g = sampler.next_gains();
            for (l, &w) in g.gains().iter().enumerate() {
                let q = q_function(w * beta / ups);
                sum[l] += q;
                sum_sq[l] += q * q;
            }
        }
        for l in 1..=big_l {
            let n = SAMPLES as f64;
            let mean = sum[l - 1] / n;
            let se = ((sum_sq[l - 1] / n - mean * mean) / n).sqrt();
            let quad = pep_quadrature(l, &model, beta, ups).unwrap();
            assert!(
                (quad - mean).abs() <= 3.0 * se,
                "l={l} L={big_l}: quadrature {quad:e} vs sampled {mean:e} ± {se:e}"
            );
        }
    }
}
