use llnroute::scenario::parse_config_str;
use llnroute::sweep::run_sweep;

#[test]
fn probe_directional() {
    let t0 = std::time::Instant::now();
    let text = "protocol = loadng,aodv\nduration_s = 900\nseeds = 1,2,3,4,5,6,7,8,9,10\n\
                sweep.axis = nodes\nsweep.values = 25,50,75\n";
    let cfg = parse_config_str(text).unwrap();
    let rows = run_sweep(&cfg, 16).unwrap();
    println!("elapsed: {:?}", t0.elapsed());
    for v in [25.0, 50.0, 75.0] {
        let mut means = std::collections::BTreeMap::new();
        for proto in ["loadng", "aodv"] {
            let rs: Vec<_> = rows.iter().filter(|r| r.protocol == proto && r.axis_value == v).collect();
            let n = rs.len() as f64;
            let pdr: f64 = rs.iter().map(|r| r.mp2p_pdr).sum::<f64>() / n;
            let p2mp_pdr: f64 = rs.iter().map(|r| r.p2mp_pdr).sum::<f64>() / n;
            let dly: f64 = rs.iter().map(|r| r.mp2p_delay_mean_ms).sum::<f64>() / n;
            let pdly: f64 = rs.iter().map(|r| r.p2mp_delay_mean_ms).sum::<f64>() / n;
            let ctl: f64 = rs.iter().map(|r| r.ctl_bytes_per_s).sum::<f64>() / n;
            println!("n={v:3} {proto:6}: mp2p_pdr={pdr:.3} p2mp_pdr={p2mp_pdr:.3} mp2p_dly={dly:7.1}ms p2mp_dly={pdly:7.1}ms ctl_B/s={ctl:8.2}");
            means.insert(proto, (pdr, dly, pdly, ctl));
        }
        let l = means["loadng"]; let a = means["aodv"];
        println!("  -> pdr_gap={:+.1}pp dly(l<a)={} p2mp_dly(l<a)={} ctl_ratio={:.2}",
            (l.0 - a.0) * 100.0, l.1 < a.1, l.2 < a.2, l.3 / a.3);
    }
}
