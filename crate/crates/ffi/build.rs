fn main() {
    #[cfg(feature = "gen_h")]
    {
        let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
        let config = cbindgen::Config::from_file(format!("{crate_dir}/cbindgen.toml")).unwrap();
        cbindgen::Builder::new()
            .with_crate(&crate_dir)
            .with_config(config)
            .generate()
            .expect("unable to generate bindings")
            .write_to_file(format!("{crate_dir}/include/strobe.h"));
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
}
