"""Image and text encoders producing a shared embedding space.

Two backends:

``toy[:dim]``
    A deterministic test double needing no model weights. Every lowercase
    word hashes to a fixed unit vector; a prompt embeds as the normalized
    mean of its word vectors. An image embeds from visual words: the name
    of its dominant palette color plus a brightness word. Images whose
    content matches the words used in the prompts (color-named classes,
    brightness-named domains) therefore land near their own prompts, which
    is all the pipeline needs and keeps CI hermetic.

``clip:<model-id>``
    A real vision-language model through transformers. Weights must be
    cached locally; nothing is downloaded.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image

PALETTE = {
    "red": (255, 0, 0),
    "green": (0, 255, 0),
    "blue": (0, 0, 255),
    "yellow": (255, 255, 0),
    "cyan": (0, 255, 255),
    "magenta": (255, 0, 255),
    "orange": (255, 128, 0),
    "purple": (128, 0, 255),
    "white": (255, 255, 255),
    "black": (0, 0, 0),
    "gray": (128, 128, 128),
}

BRIGHT_WORD = "bright"
DARK_WORD = "dark"


class ToyEncoder:
    def __init__(self, dim: int = 64):
        if dim < 8:
            raise ValueError("toy encoder needs dim >= 8")
        self.dim = dim

    def _word_vector(self, word: str) -> np.ndarray:
        digest = hashlib.blake2b(word.encode(), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        v = rng.normal(size=self.dim)
        return v / np.linalg.norm(v)

    def encode_texts(self, prompts: list[str]) -> np.ndarray:
        out = np.empty((len(prompts), self.dim))
        for i, prompt in enumerate(prompts):
            words = [w for w in prompt.lower().split() if w.isalpha()]
            if not words:
                raise ValueError(f"prompt {prompt!r} has no words")
            acc = np.sum([self._word_vector(w) for w in words], axis=0)
            out[i] = acc / np.linalg.norm(acc)
        return out

    def encode_images(self, paths: list) -> np.ndarray:
        out = np.empty((len(paths), self.dim))
        for i, path in enumerate(paths):
            with Image.open(path) as img:
                rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
            mean = rgb.reshape(-1, 3).mean(axis=0)
            color = min(
                PALETTE, key=lambda name: float(((mean - PALETTE[name]) ** 2).sum())
            )
            # tint relative to the full-strength palette color, so the
            # bright/dark word does not depend on the hue itself
            ref = float(np.linalg.norm(PALETTE[color]))
            tint = float(np.linalg.norm(mean)) / ref if ref > 1.0 else 0.0
            tone = BRIGHT_WORD if tint >= 0.8 else DARK_WORD
            acc = self._word_vector(color) + 0.5 * self._word_vector(tone)
            out[i] = acc / np.linalg.norm(acc)
        return out


class ClipEncoder:
    def __init__(self, model_id: str, batch_size: int = 16):
        try:
            import torch
            from transformers import CLIPModel, CLIPProcessor
        except ImportError as exc:
            raise RuntimeError(
                "the clip backend needs transformers and torch installed"
            ) from exc
        try:
            self._model = CLIPModel.from_pretrained(model_id, local_files_only=True)
            self._processor = CLIPProcessor.from_pretrained(model_id, local_files_only=True)
        except OSError as exc:
            raise RuntimeError(
                f"model {model_id!r} is not cached locally; this tool never downloads"
            ) from exc
        self._torch = torch
        self._model.eval()
        self.batch_size = batch_size
        self.dim = self._model.config.projection_dim

    def encode_texts(self, prompts: list[str]) -> np.ndarray:
        chunks = []
        with self._torch.no_grad():
            for start in range(0, len(prompts), self.batch_size):
                inputs = self._processor(
                    text=prompts[start : start + self.batch_size],
                    return_tensors="pt",
                    padding=True,
                )
                chunks.append(self._model.get_text_features(**inputs).numpy())
        return np.vstack(chunks).astype(np.float64)

    def encode_images(self, paths: list) -> np.ndarray:
        chunks = []
        with self._torch.no_grad():
            for start in range(0, len(paths), self.batch_size):
                images = []
                for path in paths[start : start + self.batch_size]:
                    with Image.open(path) as img:
                        images.append(img.convert("RGB"))
                inputs = self._processor(images=images, return_tensors="pt")
                chunks.append(self._model.get_image_features(**inputs).numpy())
        return np.vstack(chunks).astype(np.float64)


def make_encoder(model_id: str):
    """Build an encoder from a model identifier like ``toy:64`` or ``clip:...``."""
    if model_id == "toy" or model_id.startswith("toy:"):
        dim = int(model_id.split(":", 1)[1]) if ":" in model_id else 64
        return ToyEncoder(dim)
    if model_id.startswith("clip:"):
        return ClipEncoder(model_id.split(":", 1)[1])
    raise ValueError(f"unknown model identifier {model_id!r} (use toy[:dim] or clip:<id>)")
