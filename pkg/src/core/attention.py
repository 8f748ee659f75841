"""
Одноголовое scaled dot-product внимание и его межкадровая замена:
каждый кадр обращается к ключам и значениям первого кадра.

Все суммы по токенам берутся в каноническом порядке ключей, а смешивание каналов
делается поэлементно, поэтому перестановка токенов переставляет выход бит в бит.
"""

import math
from typing import List, Tuple

import numpy as np
from scipy.special import softmax

from .errors import NumericError, ParameterError
from .types import AttentionTensors


def channel_matmul(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """
    Умножает последнюю ось x на матрицу весов (c_in, c_out) без BLAS.

    Каждая позиция считается одной и той же последовательностью операций,
    независимо от ее места в массиве.

    :param x: Массив формы (..., c_in)
    :param weights: Матрица (c_in, c_out)
    :return: Массив формы (..., c_out)
    :raises ParameterError: Если размерности не согласованы
    """
    if weights.ndim != 2 or x.shape[-1] != weights.shape[0]:
        raise ParameterError(f"Несогласованные формы: x{x.shape} и W{weights.shape}")
    return (x[..., :, None] * weights).sum(axis=-2)


def flatten_tokens(feature_map: np.ndarray) -> np.ndarray:
    """(height, width, c) -> (height·width, c), токены построчно."""
    if feature_map.ndim != 3:
        raise ParameterError(f"Ожидалась карта признаков (h, w, c), получено {feature_map.shape}")
    height, width, channels = feature_map.shape
    return feature_map.reshape(height * width, channels)


def project_qkv(feature_map: np.ndarray,
                weights: Tuple[np.ndarray, np.ndarray, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Линейные проекции одного кадра: Q = xW_q, K = xW_k, V = xW_v по токенам.

    :param feature_map: Карта признаков (h, w, c)
    :param weights: Три матрицы (c, c)
    :return: Q, K, V формы (h·w, c)
    :raises ParameterError: Если формы не согласованы
    """
    tokens = flatten_tokens(feature_map)
    w_q, w_k, w_v = weights
    for w in (w_q, w_k, w_v):
        if w.shape != (tokens.shape[1], tokens.shape[1]):
            raise ParameterError(f"Матрица проекции должна быть {tokens.shape[1]}×{tokens.shape[1]}, получено {w.shape}")
    return channel_matmul(tokens, w_q), channel_matmul(tokens, w_k), channel_matmul(tokens, w_v)


def _check_inputs(*arrays: np.ndarray) -> None:
    for array in arrays:
        if not np.all(np.isfinite(array)):
            raise NumericError("Вход внимания содержит не конечные значения")


def _canonical_order(K: np.ndarray, V: np.ndarray) -> np.ndarray:
    # Лексикографический порядок по (K, V): зависит только от мультимножества токенов
    keys = np.concatenate([K, V], axis=1)
    return np.lexsort(keys.T[::-1])


def attention_weights(Q: np.ndarray, K: np.ndarray) -> np.ndarray:
    """
    Softmax(QKᵀ/√c) по оси ключей.

    :return: Матрица весов (tokens_q, tokens_k), строки суммируются в 1
    """
    scale = 1.0 / math.sqrt(Q.shape[1])
    scores = (Q[:, None, :] * K[None, :, :]).sum(axis=-1) * scale
    return softmax(scores, axis=1)


def _attend(Q: np.ndarray, K: np.ndarray, V: np.ndarray) -> np.ndarray:
    order = _canonical_order(K, V)
    K_sorted, V_sorted = K[order], V[order]
    weights = attention_weights(Q, K_sorted)
    return (weights[:, :, None] * V_sorted[None, :, :]).sum(axis=1)


def self_attention(Q: np.ndarray, K: np.ndarray, V: np.ndarray) -> np.ndarray:
    """
    Self-Attn(Q, K, V) = Softmax(QKᵀ/√c)·V для одного кадра.

    :param Q: Запросы (tokens_q, c)
    :param K: Ключи (tokens_k, c)
    :param V: Значения (tokens_k, c_v)
    :return: Выход (tokens_q, c_v)
    :raises ParameterError: Если формы не согласованы
    :raises NumericError: Если вход содержит NaN или inf
    """
    if Q.ndim != 2 or K.ndim != 2 or V.ndim != 2:
        raise ParameterError("Q, K, V должны быть матрицами (tokens, channels)")
    if Q.shape[1] != K.shape[1] or K.shape[0] != V.shape[0]:
        raise ParameterError(f"Несогласованные формы Q{Q.shape}, K{K.shape}, V{V.shape}")
    _check_inputs(Q, K, V)
    return _attend(Q, K, V)


def cross_frame_attention(tensors: AttentionTensors) -> List[np.ndarray]:
    """
    Межкадровое внимание: выход^k = Softmax(Q^k (K^1)ᵀ/√c)·V^1 для всех k.
    K^j и V^j при j ≥ 2 не читаются.

    :param tensors: Q, K, V всех кадров
    :return: Список из m выходов (tokens, c)
    :raises NumericError: Если Q или K^1, V^1 содержат NaN или inf
    """
    K_first, V_first = tensors.K[0], tensors.V[0]
    _check_inputs(tensors.Q, K_first, V_first)

    order = _canonical_order(K_first, V_first)
    K_sorted, V_sorted = K_first[order], V_first[order]

    outputs = []
    for Q_k in tensors.Q:
        weights = attention_weights(Q_k, K_sorted)
        outputs.append((weights[:, :, None] * V_sorted[None, :, :]).sum(axis=1))
    return outputs


def per_frame_self_attention(tensors: AttentionTensors) -> List[np.ndarray]:
    """Обычное внимание каждого кадра на самого себя; кадры полностью независимы."""
    return [self_attention(Q_k, K_k, V_k) for Q_k, K_k, V_k in zip(tensors.Q, tensors.K, tensors.V)]
