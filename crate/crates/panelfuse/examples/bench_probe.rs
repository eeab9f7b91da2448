use panelfuse::*;
use std::time::Instant;

fn main() {
    let err = ErrorSpec::Homoscedastic { sigma2: 0.5 };
    let grid = TuningGrid::simulation_preset();
    let config = PathConfig::new(PenaltyKind::Scad);
    let t0 = Instant::now();
    for r in 0..2 {
        let seed = replicate_seed(20260809, r);
        let inst = gen_dgp2(20, 20, &err, seed).unwrap();
        let design = build_design(&inst.panel);
        let idx = build_fusion_index(20, 20).unwrap();
        let t1 = Instant::now();
        let init = ridge_init_with_index(&inst.panel, &design, &idx, &RidgeConfig::default(), &config.admm).unwrap();
        let path = solution_path(&inst.panel, &design, &idx, &grid, &config, &init).unwrap();
        let sel = path.selected_fit();
        let (eri, _, _) = extended_rand_index(&sel.partition, &inst.truth).unwrap();
        println!("rep {r}: L_hat={} eri={eri:.4} path_time={:.2?}", sel.l_hat, t1.elapsed());
    }
    println!("total {:.2?}", t0.elapsed());
}
