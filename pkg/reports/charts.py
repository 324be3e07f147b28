"""
Rate-versus-distance chart (plotly, standalone HTML).
"""
from pathlib import Path
from typing import Optional, Tuple

import pandas as pd
import plotly.graph_objects as go


def sweep_figure(sweep: pd.DataFrame, operating_point: Optional[Tuple[float, float]] = None) -> go.Figure:
    """Log-scale key rate and both PLOB bounds against total distance."""
    fig = go.Figure()
    positive = sweep[sweep['rate'] > 0]
    fig.add_trace(go.Scatter(x=positive['distance_km'], y=positive['rate'],
                             mode='lines+markers', name='Key rate (finite size)'))
    fig.add_trace(go.Scatter(x=sweep['distance_km'], y=sweep['plob_absolute'],
                             mode='lines', name='Absolute PLOB bound', line={'dash': 'dash'}))
    fig.add_trace(go.Scatter(x=sweep['distance_km'], y=sweep['plob_relative'],
                             mode='lines', name='Relative PLOB bound', line={'dash': 'dot'}))
    if operating_point is not None:
        fig.add_trace(go.Scatter(x=[operating_point[0]], y=[operating_point[1]], mode='markers',
                                 marker={'symbol': 'star', 'size': 12}, name='Expected rate at published point'))
    fig.update_layout(
        xaxis_title='Total fiber length (km)',
        yaxis_title='Secret key rate (bits/pulse)',
        yaxis_type='log',
        template='plotly_white',
        legend={'x': 0.01, 'y': 0.01},
    )
    return fig


def write_sweep_chart(sweep: pd.DataFrame, path, operating_point=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sweep_figure(sweep, operating_point).write_html(str(path), include_plotlyjs=True, full_html=True)
    return path
