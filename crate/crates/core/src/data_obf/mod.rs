//! Data-level obfuscation: linear-memory encryption with on-demand runtime
//! decryption, and identifier renaming (name section, exports, imports).

pub mod memory;
pub mod rename;

pub use memory::{
    encrypt_data_segments, memory_obfuscate, rewrite_mem_instructions, synthesize_mem_helpers,
    HelperTable, MemKey, MemObfError, MemObfReport,
};
pub use rename::{
    default_allowlist, default_protected_modules, obfuscate_exports, obfuscate_function_names,
    obfuscate_imports, NameSpace, RenameEntry, RenameError, RenameMap,
};
