from crewai import Agent, Crew, Process, Task
from crewai.project import CrewBase, agent, crew, task
from crewai.agents.agent_builder.base_agent import BaseAgent
from typing import List
from recsys_fairness_eval.tools import (
    agree_tool,
    bounds_tool,
    dpfr_tool,
    evaluate_tool,
    pareto_tool,
    rerank_tool,
    similarity_tool,
    synth_tool,
)

# The crew needs an LLM; the deterministic CLI calls the tools directly.

@CrewBase
class FairnessAudit():
    """FairnessAudit crew"""

    agents: List[BaseAgent]
    tasks: List[Task]

    @agent
    def fairness_analyst(self) -> Agent:
        return Agent(
            config=self.agents_config['fairness_analyst'], # type: ignore[index]
            verbose=True,
            tools=[evaluate_tool, bounds_tool, pareto_tool, dpfr_tool, agree_tool, synth_tool, rerank_tool, similarity_tool],
        )

    @task
    def evaluate_task(self) -> Task:
        return Task(
            config=self.tasks_config['evaluate_task'], # type: ignore[index]
        )

    @task
    def frontier_task(self) -> Task:
        return Task(
            config=self.tasks_config['frontier_task'], # type: ignore[index]
        )

    @task
    def agreement_task(self) -> Task:
        return Task(
            config=self.tasks_config['agreement_task'], # type: ignore[index]
        )

    @crew
    def crew(self) -> Crew:
        """Creates the FairnessAudit crew"""
        return Crew(
            agents=self.agents, # Automatically created by the @agent decorator
            tasks=self.tasks, # Automatically created by the @task decorator
            process=Process.sequential,
            verbose=True,
        )
