//! The decoded module IR: sections, types, and index spaces.

use super::instr::Instr;

/// The four primitive value types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValType {
    I32,
    I64,
    F32,
    F64,
}

impl ValType {
    pub fn code(self) -> u8 {
        match self {
            ValType::I32 => 0x7F,
            ValType::I64 => 0x7E,
            ValType::F32 => 0x7D,
            ValType::F64 => 0x7C,
        }
    }

    pub fn from_code(b: u8) -> Option<ValType> {
        match b {
            0x7F => Some(ValType::I32),
            0x7E => Some(ValType::I64),
            0x7D => Some(ValType::F32),
            0x7C => Some(ValType::F64),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ValType::I32 => "i32",
            ValType::I64 => "i64",
            ValType::F32 => "f32",
            ValType::F64 => "f64",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct FuncType {
    pub params: Vec<ValType>,
    pub results: Vec<ValType>,
}

impl FuncType {
    pub fn new(params: Vec<ValType>, results: Vec<ValType>) -> Self {
        FuncType { params, results }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub min: u32,
    pub max: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableType {
    // MVP element type is always funcref.
    pub limits: Limits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryType {
    pub limits: Limits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalType {
    pub ty: ValType,
    pub mutable: bool,
}

/// A constant initializer expression: one instruction followed by `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstExpr {
    I32(i32),
    I64(i64),
    F32(u32),
    F64(u64),
    GlobalGet(u32),
}

impl ConstExpr {
    /// The statically known i32 value, for segment offsets.
    pub fn as_i32(&self) -> Option<i32> {
        match self {
            ConstExpr::I32(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Global {
    pub ty: GlobalType,
    pub init: ConstExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Import {
    pub module: String,
    pub name: String,
    pub desc: ImportDesc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImportDesc {
    Func(u32),
    Table(TableType),
    Memory(MemoryType),
    Global(GlobalType),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    Func,
    Table,
    Memory,
    Global,
}

impl ExportKind {
    pub fn code(self) -> u8 {
        match self {
            ExportKind::Func => 0,
            ExportKind::Table => 1,
            ExportKind::Memory => 2,
            ExportKind::Global => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub name: String,
    pub kind: ExportKind,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElemSegment {
    pub table: u32,
    pub offset: ConstExpr,
    pub funcs: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSegment {
    pub memory: u32,
    pub offset: ConstExpr,
    pub bytes: Vec<u8>,
}

/// A function body: declared locals (expanded, one entry per local) and the
/// instruction tree.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FuncBody {
    pub locals: Vec<ValType>,
    pub instrs: Vec<Instr>,
}

/// A custom section, preserved verbatim. `after` records the id of the
/// non-custom section it followed in the original byte stream (0 = file
/// start), so re-encoding keeps its position. The module's `customs` list is
/// kept in file order (non-decreasing `after`).
#[derive(Debug, Clone, PartialEq)]
pub struct CustomSection {
    pub name: String,
    pub data: Vec<u8>,
    pub after: u8,
}

/// A decoded core module.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Module {
    pub types: Vec<FuncType>,
    pub imports: Vec<Import>,
    /// Type indices of the locally defined functions, parallel to `code`.
    pub functions: Vec<u32>,
    pub tables: Vec<TableType>,
    pub memories: Vec<MemoryType>,
    pub globals: Vec<Global>,
    pub exports: Vec<Export>,
    pub start: Option<u32>,
    pub elems: Vec<ElemSegment>,
    pub code: Vec<FuncBody>,
    pub data: Vec<DataSegment>,
    pub customs: Vec<CustomSection>,
}

impl Module {
    pub fn num_imported_funcs(&self) -> u32 {
        self.imports
            .iter()
            .filter(|i| matches!(i.desc, ImportDesc::Func(_)))
            .count() as u32
    }

    pub fn num_imported_globals(&self) -> u32 {
        self.imports
            .iter()
            .filter(|i| matches!(i.desc, ImportDesc::Global(_)))
            .count() as u32
    }

    pub fn num_imported_tables(&self) -> u32 {
        self.imports
            .iter()
            .filter(|i| matches!(i.desc, ImportDesc::Table(_)))
            .count() as u32
    }

    pub fn num_imported_memories(&self) -> u32 {
        self.imports
            .iter()
            .filter(|i| matches!(i.desc, ImportDesc::Memory(_)))
            .count() as u32
    }

    /// Total size of the function index space (imports + local functions).
    pub fn num_funcs(&self) -> u32 {
        self.num_imported_funcs() + self.functions.len() as u32
    }

    pub fn num_tables(&self) -> u32 {
        self.num_imported_tables() + self.tables.len() as u32
    }

    pub fn num_memories(&self) -> u32 {
        self.num_imported_memories() + self.memories.len() as u32
    }

    pub fn num_globals(&self) -> u32 {
        self.num_imported_globals() + self.globals.len() as u32
    }

    /// Type index of any function in the index space.
    pub fn func_type_idx(&self, func: u32) -> Option<u32> {
        let n_imports = self.num_imported_funcs();
        if func < n_imports {
            self.imports
                .iter()
                .filter_map(|i| match i.desc {
                    ImportDesc::Func(t) => Some(t),
                    _ => None,
                })
                .nth(func as usize)
        } else {
            self.functions.get((func - n_imports) as usize).copied()
        }
    }

    /// Signature of any function in the index space.
    pub fn func_type(&self, func: u32) -> Option<&FuncType> {
        self.types.get(self.func_type_idx(func)? as usize)
    }

    /// Body of a locally defined function, by function-space index.
    pub fn func_body(&self, func: u32) -> Option<&FuncBody> {
        let local = func.checked_sub(self.num_imported_funcs())?;
        self.code.get(local as usize)
    }

    pub fn func_body_mut(&mut self, func: u32) -> Option<&mut FuncBody> {
        let local = func.checked_sub(self.num_imported_funcs())?;
        self.code.get_mut(local as usize)
    }

    /// Returns the index of a structurally equal function type, adding it if
    /// absent.
    pub fn find_or_add_type(&mut self, ft: FuncType) -> u32 {
        if let Some(i) = self.types.iter().position(|t| *t == ft) {
            return i as u32;
        }
        self.types.push(ft);
        (self.types.len() - 1) as u32
    }

    /// Appends a local function with the given type index and body; returns
    /// its index in the function space.
    pub fn push_function(&mut self, type_idx: u32, body: FuncBody) -> u32 {
        self.functions.push(type_idx);
        self.code.push(body);
        self.num_imported_funcs() + (self.functions.len() - 1) as u32
    }

    pub fn custom(&self, name: &str) -> Option<&CustomSection> {
        self.customs.iter().find(|c| c.name == name)
    }

    pub fn custom_mut(&mut self, name: &str) -> Option<&mut CustomSection> {
        self.customs.iter_mut().find(|c| c.name == name)
    }

    /// Table type by table-space index (imports first).
    pub fn table_type(&self, idx: u32) -> Option<TableType> {
        let n = self.num_imported_tables();
        if idx < n {
            self.imports
                .iter()
                .filter_map(|i| match i.desc {
                    ImportDesc::Table(t) => Some(t),
                    _ => None,
                })
                .nth(idx as usize)
        } else {
            self.tables.get((idx - n) as usize).copied()
        }
    }

    /// Memory type by memory-space index (imports first).
    pub fn memory_type(&self, idx: u32) -> Option<MemoryType> {
        let n = self.num_imported_memories();
        if idx < n {
            self.imports
                .iter()
                .filter_map(|i| match i.desc {
                    ImportDesc::Memory(t) => Some(t),
                    _ => None,
                })
                .nth(idx as usize)
        } else {
            self.memories.get((idx - n) as usize).copied()
        }
    }

    /// Global type by global-space index (imports first).
    pub fn global_type(&self, idx: u32) -> Option<GlobalType> {
        let n = self.num_imported_globals();
        if idx < n {
            self.imports
                .iter()
                .filter_map(|i| match i.desc {
                    ImportDesc::Global(t) => Some(t),
                    _ => None,
                })
                .nth(idx as usize)
        } else {
            self.globals.get((idx - n) as usize).map(|g| g.ty)
        }
    }
}
