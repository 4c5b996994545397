fn main() {
    // The committed include/effcode.h is the source of truth for consumers;
    // this hook regenerates it when the API surface changes.
    #[cfg(feature = "generate-header")]
    {
        let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("set by cargo");
        let config = cbindgen::Config::from_file(format!("{crate_dir}/cbindgen.toml"))
            .expect("cbindgen.toml parses");
        cbindgen::Builder::new()
            .with_crate(&crate_dir)
            .with_config(config)
            .generate()
            .expect("header generation")
            .write_to_file(format!("{crate_dir}/include/effcode.h"));
    }
}
