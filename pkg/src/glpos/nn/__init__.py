from .tensor import Tensor, Parameter
from .layers import (Module, Linear, Embedding, MLP, GATConv, LayerNorm, SelfAttention,
                     TransformerLayer, TransformerEncoder, LSTM, BiLSTM, gat_edges)
from .optim import Adam, AdamW, clip_grad_norm, make_optimizer
from .checkpoint import save_checkpoint, load_checkpoint, read_checkpoint, register_model, CheckpointError
from .gradcheck import grad_check
