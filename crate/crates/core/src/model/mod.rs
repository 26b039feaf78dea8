pub struct ModelConfig;
pub struct Transformer;
pub struct Checkpoint;
