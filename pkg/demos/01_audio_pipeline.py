"""Audio ingestion walkthrough: load, standardize, concatenate.

Everything downstream of the audio layer sees mono float32 at 16 kHz, so
this is the place to see what the toolkit does to arbitrary WAV input.
"""

import tempfile
from pathlib import Path

import numpy as np

from sicl import Waveform, concat_audio, duration_seconds, load_wav, standardize, write_wav

workdir = Path(tempfile.mkdtemp(prefix="sicl_demo_"))

# Write a 44.1 kHz stereo-ish test file (we keep it mono here) with a 440 Hz
# tone, then load it back.
rate = 44100
t = np.arange(rate) / rate
tone = Waveform((0.5 * np.sin(2 * np.pi * 440 * t)).astype(np.float32), rate)
wav_path = workdir / "tone_44k.wav"
write_wav(wav_path, tone)

loaded = load_wav(wav_path)
print(f"loaded: {len(loaded)} samples at {loaded.sample_rate} Hz "
      f"({duration_seconds(loaded):.2f} s)")

# standardize resamples to 16 kHz with a windowed-sinc filter; the tone
# frequency survives the rate change.
std = standardize(loaded)
spectrum = np.abs(np.fft.rfft(std.samples.astype(np.float64)))
print(f"standardized: {len(std)} samples at {std.sample_rate} Hz, "
      f"dominant frequency {np.argmax(spectrum)} Hz")

# concat_audio joins waveforms with exact-zero gaps. This is how in-context
# example audio is placed ahead of the test utterance.
gap = 0.1
combined = concat_audio([std, std, std], gap_seconds=gap)
print(f"concatenated 3 copies with {gap} s gaps -> {duration_seconds(combined):.2f} s")
print(f"gap region is exact silence: "
      f"{bool((combined.samples[len(std):len(std) + 1600] == 0).all())}")
