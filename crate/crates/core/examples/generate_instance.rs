//! Generates a desk-scale instance, writes it as JSON and prints what it
//! contains.
//!
//! cargo run --example generate_instance -- [3|7] [seed] [out.json]

use mcsp::instance::{generate_instance, load_instance, save_instance, CellLayout, GeneratorConfig};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seven = args.first().is_some_and(|a| a == "7");
    let seed = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let out = args.get(2).cloned().unwrap_or_else(|| "instance.json".into());
    let cfg = GeneratorConfig {
        cells: if seven { CellLayout::Seven } else { CellLayout::Three },
        num_contents: if seven { 200 } else { 100 },
        num_requests: if seven { 2000 } else { 500 },
        seed,
        ..GeneratorConfig::default()
    };
    let inst = generate_instance(&cfg)?;
    save_instance(&inst, &out)?;
    assert_eq!(load_instance(&out)?, inst);

    let (three, two) = cfg.mcr_split();
    let mut popularity = vec![0usize; inst.num_contents()];
    for r in &inst.requests {
        popularity[r.content] += 1;
    }
    let requested = popularity.iter().filter(|&&n| n > 0).count();
    println!("wrote {out}");
    println!(
        "{} cells, {} contents ({} requested), {} requests ({three} with 3 candidates, {two} with 2), {} slots",
        inst.num_servers(),
        inst.num_contents(),
        requested,
        inst.requests.len(),
        inst.horizon
    );
    println!("cache capacity {} and backhaul capacity {} per server", inst.servers[0].cache_capacity, inst.servers[0].backhaul_capacity);
    Ok(())
}
